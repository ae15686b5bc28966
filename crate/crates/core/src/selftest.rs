//! Built-in oracle checks with known answers. No statistics involved.

use crate::mc_task::mc_k;
use crate::numerics::{least_squares_fit, operator_norm_2, spectral_radius, Matrix};
use crate::reservoir::{init_deep_esn, DeepEsn, DeepEsnConfig, Layer};
use crate::rng::{derive_stream, SplitMix64};

pub const RESCALING_SEEDS: u64 = 20;
pub const RESCALING_RHOS: [f64; 3] = [0.1, 0.9, 1.5];
pub const RESCALING_TOLERANCE: f64 = 1e-8;
pub const SCALAR_TOLERANCE: f64 = 1e-12;
pub const LSTSQ_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            passed,
            detail,
        }
    }
}

/// Runs every check. Full-size rescaling dominates the cost (a few seconds).
pub fn run_all() -> Vec<Check> {
    vec![
        scalar_network(),
        rescaling_exactness(RESCALING_SEEDS),
        mc_k_conventions(),
        least_squares_oracle(),
        rng_reference(),
    ]
}

pub fn scalar_network() -> Check {
    let name = "scalar network step";
    let config = DeepEsnConfig {
        n_layers: 2,
        units_per_layer: 1,
        input_dim: 1,
        rho_target: 0.5,
        coupling_norm: 1.0,
    };
    let layer = Layer {
        input: Matrix::from_rows(&[[1.0]]),
        recurrent: Matrix::from_rows(&[[0.5]]),
    };
    let result = DeepEsn::from_layers(config, vec![layer.clone(), layer])
        .and_then(|esn| esn.step(&esn.zero_state(), &[0.5]));
    match result {
        Ok(s) => {
            let e1 = (s.layers[0][0] - 0.5f64.tanh()).abs();
            let e2 = (s.layers[1][0] - 0.5f64.tanh().tanh()).abs();
            Check::new(
                name,
                e1 <= SCALAR_TOLERANCE && e2 <= SCALAR_TOLERANCE,
                format!(
                    "x1 = {:.12}, x2 = {:.12}, max err {:.1e}",
                    s.layers[0][0],
                    s.layers[1][0],
                    e1.max(e2)
                ),
            )
        }
        Err(e) => Check::new(name, false, e.to_string()),
    }
}

/// Full-size networks for `seeds` seeds at each of `RESCALING_RHOS`.
pub fn rescaling_exactness(seeds: u64) -> Check {
    let name = "rescaling exactness";
    let (mut worst_rho, mut worst_norm) = (0.0f64, 0.0f64);
    for &rho in &RESCALING_RHOS {
        for seed in 0..seeds {
            let esn = match init_deep_esn(&DeepEsnConfig::with_rho(rho), seed) {
                Ok(esn) => esn,
                Err(e) => return Check::new(name, false, format!("rho {rho} seed {seed}: {e}")),
            };
            for layer in esn.layers() {
                match (
                    spectral_radius(&layer.recurrent),
                    operator_norm_2(&layer.input),
                ) {
                    (Ok(r), Ok(n)) => {
                        worst_rho = worst_rho.max((r - rho).abs());
                        worst_norm = worst_norm.max((n - 1.0).abs());
                    }
                    (Err(e), _) | (_, Err(e)) => return Check::new(name, false, e.to_string()),
                }
            }
        }
    }
    Check::new(
        name,
        worst_rho <= RESCALING_TOLERANCE && worst_norm <= RESCALING_TOLERANCE,
        format!("{seeds} seeds x {RESCALING_RHOS:?}: max |rho err| {worst_rho:.1e}, max |norm err| {worst_norm:.1e}"),
    )
}

pub fn mc_k_conventions() -> Check {
    let name = "mc_k conventions";
    let t = [1.0, 2.0, 3.0, 4.0, 6.0];
    let affine: Vec<f64> = t.iter().map(|x| -2.0 * x + 3.0).collect();
    let cases = [
        ("perfect", mc_k(&t, &t), 1.0),
        ("affine", mc_k(&affine, &t), 1.0),
        ("constant", mc_k(&[2.5; 5], &t), 0.0),
    ];
    let mut detail = Vec::new();
    let mut passed = true;
    for (label, got, want) in cases {
        match got {
            Ok(v) => {
                passed &= v == want;
                detail.push(format!("{label} = {v}"));
            }
            Err(e) => {
                passed = false;
                detail.push(format!("{label}: {e}"));
            }
        }
    }
    Check::new(name, passed, detail.join(", "))
}

/// Gauss-Jordan with partial pivoting on the normal equations.
fn normal_equations(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let p = x.cols();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (i, row) in a.iter_mut().enumerate() {
        for j in 0..p {
            row[j] = (0..x.rows()).map(|r| x[(r, i)] * x[(r, j)]).sum();
        }
        row[p] = (0..x.rows()).map(|r| x[(r, i)] * y[r]).sum();
    }
    for c in 0..p {
        let pivot = (c..p)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        a.swap(c, pivot);
        let pivot_row = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot_row[c];
                for (x, &pv) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                    *x -= f * pv;
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

pub fn least_squares_oracle() -> Check {
    let name = "least squares vs normal equations";
    let mut worst = 0.0f64;
    for trial in 0..5u64 {
        let mut rng = derive_stream(trial, "selftest-lstsq");
        let x = Matrix::from_fn(50, 10, |_, _| rng.uniform(-1.0, 1.0));
        let y: Vec<f64> = (0..50).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let w = match least_squares_fit(&x, &Matrix::column(&y), 0.0) {
            Ok(w) => w,
            Err(e) => return Check::new(name, false, e.to_string()),
        };
        for (a, b) in w.as_slice().iter().zip(normal_equations(&x, &y)) {
            worst = worst.max((a - b).abs());
        }
    }
    Check::new(
        name,
        worst <= LSTSQ_TOLERANCE,
        format!("5 random 50x10 systems, max |diff| {worst:.1e}"),
    )
}

pub fn rng_reference() -> Check {
    let mut sm = SplitMix64::new(0);
    let got = [sm.next_u64(), sm.next_u64()];
    let want = [0xE220_A839_7B1D_CDAF, 0x6E78_9E6A_A1B9_65F4];
    Check::new(
        "splitmix64 reference vector",
        got == want,
        format!("{:#018x}, {:#018x}", got[0], got[1]),
    )
}
