use deepesn_core::mc_task::{fit_readouts, generate_input, measure_layer, INPUT_STREAM};
use deepesn_core::reservoir::{init_deep_esn, DeepEsnConfig, Layer};
use deepesn_core::{DeepEsn, LayerTrajectory, Matrix, McProtocol};

fn small_protocol() -> McProtocol {
    McProtocol {
        total_steps: 1400,
        washout: 100,
        train_len: 1000,
        test_len: 300,
        k_max: 40,
        ..Default::default()
    }
}

fn trajectories(
    config: &DeepEsnConfig,
    seed: u64,
    p: &McProtocol,
) -> (Vec<LayerTrajectory>, Vec<f64>) {
    let u = generate_input(p, seed, INPUT_STREAM);
    let esn = init_deep_esn(config, seed).unwrap();
    (esn.run_sequence(&Matrix::column(&u)).unwrap(), u)
}

fn small_esn(rho: f64) -> DeepEsnConfig {
    DeepEsnConfig {
        n_layers: 3,
        units_per_layer: 25,
        input_dim: 1,
        rho_target: rho,
        coupling_norm: 1.0,
    }
}

#[test]
fn readouts_never_read_washout_or_test_rows() {
    let p = small_protocol();
    let (traj, u) = trajectories(&small_esn(0.9), 1, &p);
    let states = &traj[1].states;
    let reference = fit_readouts(states, &u, &p).unwrap();

    let mut poisoned = states.clone();
    for r in (0..p.washout).chain(p.test_range()) {
        poisoned.row_mut(r).fill(f64::NAN);
    }
    let mut u2 = u.clone();
    for t in (0..p.washout - p.k_max).chain(p.washout + p.train_len - 1..p.total_steps) {
        u2[t] = f64::NAN;
    }
    assert_eq!(fit_readouts(&poisoned, &u2, &p).unwrap(), reference);

    let mut washout_nan = states.clone();
    for r in 0..p.washout {
        washout_nan.row_mut(r).fill(f64::NAN);
    }
    let t = LayerTrajectory {
        layer: 2,
        states: washout_nan,
    };
    let clean = measure_layer(&traj[1], &u, &p).unwrap();
    assert_eq!(measure_layer(&t, &u, &p).unwrap(), clean);
}

#[test]
fn curves_are_invariant_to_input_scaling() {
    let p = small_protocol();
    let (traj, u) = trajectories(&small_esn(0.9), 3, &p);
    for t in &traj {
        let base = measure_layer(t, &u, &p).unwrap();
        for c in [2.5, -0.3, 1e3] {
            let scaled: Vec<f64> = u.iter().map(|v| v * c).collect();
            let other = measure_layer(t, &scaled, &p).unwrap();
            for (a, b) in base.forgetting_curve.iter().zip(&other.forgetting_curve) {
                assert!((a - b).abs() <= 1e-8, "c={c}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn truncation_is_a_prefix_at_full_size() {
    let long = McProtocol::default();
    let short = McProtocol { k_max: 100, ..long };
    let config = DeepEsnConfig {
        n_layers: 2,
        ..DeepEsnConfig::with_rho(0.9)
    };
    let (traj, u) = trajectories(&config, 4, &long);
    for t in &traj {
        let a = measure_layer(t, &u, &long).unwrap();
        let b = measure_layer(t, &u, &short).unwrap();
        assert_eq!(&a.forgetting_curve[..100], b.forgetting_curve.as_slice());
        let prefix = a.forgetting_curve[..100].iter().fold(0.0, |s, v| s + v);
        assert_eq!(prefix, b.mc_total);
    }
}

#[test]
fn intercept_barely_changes_capacity_at_full_size() {
    let plain = McProtocol::default();
    let with = McProtocol {
        intercept: true,
        ..plain
    };
    let config = DeepEsnConfig {
        n_layers: 2,
        ..DeepEsnConfig::with_rho(0.9)
    };
    let (traj, u) = trajectories(&config, 5, &plain);
    let mut worst = 0.0f64;
    for t in &traj {
        let a = measure_layer(t, &u, &plain).unwrap();
        let b = measure_layer(t, &u, &with).unwrap();
        for (x, y) in a.forgetting_curve.iter().zip(&b.forgetting_curve) {
            worst = worst.max((x - y).abs());
        }
    }
    // One extra regressor fitted on n rows moves out-of-sample r^2 by O(1/n).
    let bound = 4.0 / plain.train_len as f64;
    assert!(worst <= bound, "max |delta MC_k| = {worst:e}");
}

#[test]
fn single_unit_network_matches_linear_recurrence() {
    let a = 0.5;
    let w = 1e-3;
    let config = DeepEsnConfig {
        n_layers: 1,
        units_per_layer: 1,
        input_dim: 1,
        rho_target: a,
        coupling_norm: w,
    };
    let layer = Layer {
        input: Matrix::from_rows(&[[w]]),
        recurrent: Matrix::from_rows(&[[a]]),
    };
    let esn = DeepEsn::from_layers(config, vec![layer]).unwrap();
    let p = McProtocol {
        k_max: 20,
        ..Default::default()
    };
    let u = generate_input(&p, 6, INPUT_STREAM);
    let traj = esn.run_sequence(&Matrix::column(&u)).unwrap();

    let mut x = 0.0f64;
    for (t, &ut) in u.iter().enumerate() {
        x = (w * ut + a * x).tanh();
        assert_eq!(traj[0].states[(t, 0)], x);
    }

    let r = measure_layer(&traj[0], &u, &p).unwrap();
    let argmax = (0..p.k_max)
        .max_by(|&i, &j| r.forgetting_curve[i].total_cmp(&r.forgetting_curve[j]))
        .unwrap();
    assert_eq!(argmax, 0);
    // Linear limit: corr^2(x_t, u_{t-k}) = a^(2k) (1 - a^2).
    for (k, got) in r.forgetting_curve.iter().enumerate().take(4) {
        let want = a.powi(2 * (k as i32 + 1)) * (1.0 - a * a);
        assert!((got - want).abs() < 0.05, "k={}: {got} vs {want}", k + 1);
    }
    assert!(r.mc_total < 1.0 + 2.0);
    assert!((r.mc_total - a * a).abs() < 0.1, "{}", r.mc_total);
}
