//! Short-term memory capacity benchmark.
//!
//! A layer's states are asked to reconstruct the input delayed by `k` steps,
//! one linear readout per delay. The squared correlation between readout and
//! delayed input on held-out data is the k-delay capacity `MC_k`; summed over
//! `k = 1..=k_max` it gives the layer's memory capacity.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{LeastSquares, Matrix};
use crate::reservoir::LayerTrajectory;
use crate::rng::derive_stream;

/// Label of the stream the driving input is drawn from.
pub const INPUT_STREAM: &str = "input-signal";

/// Variances below this are treated as zero, giving `MC_k = 0`.
const ZERO_VARIANCE: f64 = 1e-24;

/// Time-line split and readout settings.
///
/// The run is carved into `[0, washout)`, `[washout, washout + train_len)` and
/// the final `test_len` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McProtocol {
    pub total_steps: usize,
    pub washout: usize,
    pub train_len: usize,
    pub test_len: usize,
    pub k_max: usize,
    pub input_low: f64,
    pub input_high: f64,
    pub ridge: f64,
    /// Adds a constant feature to every readout.
    pub intercept: bool,
}

impl Default for McProtocol {
    fn default() -> Self {
        McProtocol {
            total_steps: 6000,
            washout: 1000,
            train_len: 4000,
            test_len: 1000,
            k_max: 200,
            input_low: -0.8,
            input_high: 0.8,
            ridge: 0.0,
            intercept: false,
        }
    }
}

impl McProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.washout + self.train_len + self.test_len != self.total_steps {
            return Err(Error::config(format!(
                "washout ({}) + train_len ({}) + test_len ({}) must equal total_steps ({})",
                self.washout, self.train_len, self.test_len, self.total_steps
            )));
        }
        if self.k_max == 0 {
            return Err(Error::config("k_max must be at least 1"));
        }
        if self.train_len == 0 {
            return Err(Error::config("train_len must be at least 1"));
        }
        if self.test_len < 2 {
            return Err(Error::config("test_len must be at least 2"));
        }
        if self.washout < self.k_max {
            return Err(Error::Protocol(format!(
                "washout ({}) must be at least k_max ({}) so every delayed target exists",
                self.washout, self.k_max
            )));
        }
        if !(self.input_low.is_finite()
            && self.input_high.is_finite()
            && self.input_low < self.input_high)
        {
            return Err(Error::config(format!(
                "input range [{}, {}) is empty or not finite",
                self.input_low, self.input_high
            )));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::config(format!(
                "ridge must be finite and >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    pub fn train_range(&self) -> Range<usize> {
        self.washout..self.washout + self.train_len
    }

    pub fn test_range(&self) -> Range<usize> {
        self.washout + self.train_len..self.total_steps
    }
}

/// `total_steps` i.i.d. draws from `[input_low, input_high)`.
pub fn generate_input(protocol: &McProtocol, seed: u64, label: &str) -> Vec<f64> {
    let mut rng = derive_stream(seed, label);
    (0..protocol.total_steps)
        .map(|_| rng.uniform(protocol.input_low, protocol.input_high))
        .collect()
}

/// `u(t - k)` for every `t` in `range`. Never pads.
pub fn delayed_target(u: &[f64], k: usize, range: Range<usize>) -> Result<Vec<f64>> {
    if range.start < k {
        return Err(Error::Protocol(format!(
            "delay {k} needs inputs before t = 0 for range starting at {}",
            range.start
        )));
    }
    if range.end > u.len() || range.start > range.end {
        return Err(Error::Protocol(format!(
            "range {range:?} outside an input of length {}",
            u.len()
        )));
    }
    Ok(u[range.start - k..range.end - k].to_vec())
}

/// Readout weights mapping state rows to `target`.
pub fn train_readout(states_train: &Matrix, target_train: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if states_train.rows() != target_train.len() {
        return Err(Error::data(format!(
            "{} state rows but {} targets",
            states_train.rows(),
            target_train.len()
        )));
    }
    let w = LeastSquares::factor(states_train, ridge)?.solve(&Matrix::column(target_train))?;
    Ok(w.into_vec())
}

/// Squared Pearson correlation with population moments.
pub fn mc_k(y_pred: &[f64], target: &[f64]) -> Result<f64> {
    if y_pred.len() != target.len() {
        return Err(Error::data(format!(
            "prediction length {} differs from target length {}",
            y_pred.len(),
            target.len()
        )));
    }
    if y_pred.len() < 2 {
        return Err(Error::data("correlation needs at least two samples"));
    }
    let n = y_pred.len() as f64;
    let mean_y = y_pred.iter().sum::<f64>() / n;
    let mean_t = target.iter().sum::<f64>() / n;
    let (mut cov, mut var_y, mut var_t) = (0.0, 0.0, 0.0);
    for (&y, &t) in y_pred.iter().zip(target) {
        let (dy, dt) = (y - mean_y, t - mean_t);
        cov += dy * dt;
        var_y += dy * dy;
        var_t += dt * dt;
    }
    cov /= n;
    var_y /= n;
    var_t /= n;
    if var_y < ZERO_VARIANCE || var_t < ZERO_VARIANCE {
        return Ok(0.0);
    }
    Ok(((cov * cov) / (var_y * var_t)).min(1.0))
}

/// Forgetting curve of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// 1-based layer index.
    pub layer: usize,
    /// `MC_k` for `k = 1..=k_max`.
    pub forgetting_curve: Vec<f64>,
    pub mc_total: f64,
}

impl McResult {
    pub fn from_curve(layer: usize, forgetting_curve: Vec<f64>) -> Self {
        let mc_total = forgetting_curve.iter().fold(0.0, |acc, v| acc + v);
        McResult {
            layer,
            forgetting_curve,
            mc_total,
        }
    }
}

fn design(states: &Matrix, range: Range<usize>, intercept: bool) -> Matrix {
    let rows = states.row_range(range);
    if intercept {
        rows.with_constant_column(1.0)
    } else {
        rows
    }
}

fn check_lengths(states: &Matrix, u: &[f64], protocol: &McProtocol) -> Result<()> {
    protocol.validate()?;
    if states.rows() != protocol.total_steps || u.len() != protocol.total_steps {
        return Err(Error::data(format!(
            "trajectory has {} steps and input {}, protocol expects {}",
            states.rows(),
            u.len(),
            protocol.total_steps
        )));
    }
    Ok(())
}

/// Readout weights for every delay: column `k - 1` reconstructs `u(t - k)`.
/// Only training rows of `states` are read.
pub fn fit_readouts(states: &Matrix, u: &[f64], protocol: &McProtocol) -> Result<Matrix> {
    check_lengths(states, u, protocol)?;
    let train = protocol.train_range();
    let x = design(states, train.clone(), protocol.intercept);
    let mut y = Matrix::zeros(train.len(), protocol.k_max);
    for k in 1..=protocol.k_max {
        for (row, value) in delayed_target(u, k, train.clone())?.into_iter().enumerate() {
            y[(row, k - 1)] = value;
        }
    }
    LeastSquares::factor(&x, protocol.ridge)?.solve(&y)
}

/// Memory capacity of one layer over `k = 1..=k_max`.
pub fn measure_layer(
    trajectory: &LayerTrajectory,
    u: &[f64],
    protocol: &McProtocol,
) -> Result<McResult> {
    let weights = fit_readouts(&trajectory.states, u, protocol)?;
    let test = protocol.test_range();
    let predictions =
        design(&trajectory.states, test.clone(), protocol.intercept).matmul(&weights)?;
    let curve = (1..=protocol.k_max)
        .map(|k| {
            mc_k(
                &predictions.col(k - 1),
                &delayed_target(u, k, test.clone())?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McResult::from_curve(trajectory.layer, curve))
}

/// `MC_k` for a single delay, `k = 0` included. Diagnostic only; the memory
/// capacity itself starts at `k = 1`.
pub fn delay_capacity(states: &Matrix, u: &[f64], protocol: &McProtocol, k: usize) -> Result<f64> {
    check_lengths(states, u, protocol)?;
    let train = protocol.train_range();
    let test = protocol.test_range();
    let w = train_readout(
        &design(states, train.clone(), protocol.intercept),
        &delayed_target(u, k, train)?,
        protocol.ridge,
    )?;
    let pred = design(states, test.clone(), protocol.intercept).matmul(&Matrix::column(&w))?;
    mc_k(pred.as_slice(), &delayed_target(u, k, test)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_protocol() -> McProtocol {
        McProtocol {
            total_steps: 700,
            washout: 100,
            train_len: 400,
            test_len: 200,
            k_max: 20,
            ..McProtocol::default()
        }
    }

    #[test]
    fn default_split_is_consistent() {
        let p = McProtocol::default();
        p.validate().unwrap();
        assert_eq!(p.train_range(), 1000..5000);
        assert_eq!(p.test_range(), 5000..6000);
    }

    #[test]
    fn protocol_validation() {
        let p = McProtocol {
            train_len: 3999,
            ..McProtocol::default()
        };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        let p = McProtocol {
            washout: 100,
            train_len: 4900,
            ..McProtocol::default()
        };
        assert!(matches!(p.validate(), Err(Error::Protocol(_))));
        let p = McProtocol {
            input_low: 1.0,
            input_high: 1.0,
            ..McProtocol::default()
        };
        assert!(p.validate().is_err());
        let p = McProtocol {
            ridge: -1.0,
            ..McProtocol::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn input_is_bounded_deterministic_and_white() {
        let p = McProtocol::default();
        let u = generate_input(&p, 0, INPUT_STREAM);
        assert_eq!(u.len(), 6000);
        assert!(u.iter().all(|x| (-0.8..0.8).contains(x)));
        assert_eq!(u, generate_input(&p, 0, INPUT_STREAM));
        let n = u.len() as f64;
        let mean = u.iter().sum::<f64>() / n;
        let var = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let lag1 = u
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / n
            / var;
        assert!(lag1.abs() < 0.05, "lag-1 autocorrelation {lag1}");
    }

    #[test]
    fn delayed_target_indexing() {
        let u = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(delayed_target(&u, 1, 2..4).unwrap(), vec![2.0, 3.0]);
        assert_eq!(delayed_target(&u, 0, 1..3).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(
            delayed_target(&u, 3, 2..4),
            Err(Error::Protocol(_))
        ));
        assert!(delayed_target(&u, 0, 2..5).is_err());
    }

    #[test]
    fn delayed_target_shift_round_trip() {
        let u: Vec<f64> = (0..50).map(|i| i as f64 * 0.5).collect();
        for k in 0..10 {
            let d = delayed_target(&u, k, 12..40).unwrap();
            assert_eq!(d, u[12 - k..40 - k].to_vec());
            for (i, v) in d.iter().enumerate() {
                assert_eq!(*v, u[12 + i - k]);
            }
        }
    }

    #[test]
    fn mc_k_conventions() {
        let t = [1.0, 2.0, 3.0, 4.0, 6.0];
        assert_eq!(mc_k(&t, &t).unwrap(), 1.0);
        let affine: Vec<f64> = t.iter().map(|x| -2.0 * x + 3.0).collect();
        assert_eq!(mc_k(&affine, &t).unwrap(), 1.0);
        assert_eq!(mc_k(&[2.5; 5], &t).unwrap(), 0.0);
        assert_eq!(mc_k(&t, &[0.0; 5]).unwrap(), 0.0);
        assert!(matches!(mc_k(&t, &t[..4]), Err(Error::Data(_))));
    }

    #[test]
    fn mc_k_affine_on_irrational_data() {
        let t: Vec<f64> = (0..300).map(|i| (i as f64 * 0.913).sin()).collect();
        let y: Vec<f64> = t.iter().map(|x| -2.0 * x + 3.0).collect();
        assert!((mc_k(&y, &t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_feature_is_recovered() {
        let n = 60;
        let target: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let states = Matrix::from_fn(n, 3, |r, c| match c {
            0 => (r as f64 * 1.1).cos(),
            1 => target[r],
            _ => (r as f64 * 0.2).sin() * 0.5,
        });
        let w = train_readout(&states, &target, 0.0).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-10 && w[0].abs() < 1e-10 && w[2].abs() < 1e-10);
        let pred = states.matmul(&Matrix::column(&w)).unwrap();
        assert!((mc_k(pred.as_slice(), &target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_target_has_no_training_correlation() {
        let n = 80;
        let states = Matrix::from_fn(n, 4, |r, c| ((r * (c + 2)) as f64 * 0.29).sin());
        // Gram-Schmidt residual of a generic vector against the state columns.
        let mut target: Vec<f64> = (0..n).map(|i| (i as f64 * 0.77).cos()).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in 0..4 {
            let mut q = states.col(c);
            for b in &basis {
                let d: f64 = q.iter().zip(b).map(|(x, y)| x * y).sum();
                q.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            q.iter_mut().for_each(|x| *x /= norm);
            basis.push(q);
        }
        for b in &basis {
            let d: f64 = target.iter().zip(b).map(|(x, y)| x * y).sum();
            target.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let w = train_readout(&states, &target, 0.0).unwrap();
        let pred = states.matmul(&Matrix::column(&w)).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1e-10));
        assert!(mc_k(pred.as_slice(), &target).unwrap() < 1e-12);
    }

    #[test]
    fn huge_ridge_shrinks_readout() {
        let states = Matrix::from_fn(50, 5, |r, c| ((r + 3 * c) as f64 * 0.41).sin());
        let target: Vec<f64> = (0..50).map(|i| (i as f64 * 0.13).cos()).collect();
        let w = train_readout(&states, &target, 1e12).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn zero_states_give_zero_capacity() {
        let p = small_protocol();
        let traj = LayerTrajectory {
            layer: 1,
            states: Matrix::zeros(p.total_steps, 5),
        };
        let u = generate_input(&p, 1, INPUT_STREAM);
        let r = measure_layer(&traj, &u, &p).unwrap();
        assert_eq!(r.mc_total, 0.0);
        assert_eq!(r.forgetting_curve.len(), p.k_max);
    }

    #[test]
    fn tapped_delay_line_remembers_exactly_its_taps() {
        // States are u(t-1), u(t-3): capacity 1 at those delays, ~0 elsewhere.
        let p = small_protocol();
        let u = generate_input(&p, 2, INPUT_STREAM);
        let states = Matrix::from_fn(p.total_steps, 2, |t, c| {
            let k = if c == 0 { 1 } else { 3 };
            if t >= k {
                u[t - k]
            } else {
                0.0
            }
        });
        let r = measure_layer(&LayerTrajectory { layer: 1, states }, &u, &p).unwrap();
        assert!((r.forgetting_curve[0] - 1.0).abs() < 1e-12);
        assert!((r.forgetting_curve[2] - 1.0).abs() < 1e-12);
        for (i, v) in r.forgetting_curve.iter().enumerate() {
            if i != 0 && i != 2 {
                assert!(*v < 0.05, "k={} mc={v}", i + 1);
            }
        }
        let sum: f64 = r.forgetting_curve.iter().fold(0.0, |a, b| a + b);
        assert_eq!(sum, r.mc_total);
        assert!(delay_capacity(&r_states(&u, &p), &u, &p, 0).unwrap() < 0.05);
    }

    fn r_states(u: &[f64], p: &McProtocol) -> Matrix {
        Matrix::from_fn(p.total_steps, 1, |t, _| if t >= 1 { u[t - 1] } else { 0.0 })
    }

    #[test]
    fn batched_readouts_match_single_delay_training() {
        let p = small_protocol();
        let u = generate_input(&p, 4, INPUT_STREAM);
        let states = Matrix::from_fn(p.total_steps, 6, |t, c| {
            (u[t] * (c as f64 + 1.0) + t as f64 * 0.01).tanh()
        });
        let all = fit_readouts(&states, &u, &p).unwrap();
        let train = p.train_range();
        for k in [1, 7, 20] {
            let w = train_readout(
                &states.row_range(train.clone()),
                &delayed_target(&u, k, train.clone()).unwrap(),
                0.0,
            )
            .unwrap();
            for (j, wj) in w.iter().enumerate() {
                assert_eq!(wj.to_bits(), all[(j, k - 1)].to_bits());
            }
        }
    }

    #[test]
    fn length_mismatch_is_data_error() {
        let p = small_protocol();
        let traj = LayerTrajectory {
            layer: 1,
            states: Matrix::zeros(p.total_steps - 1, 2),
        };
        let u = generate_input(&p, 1, INPUT_STREAM);
        assert!(matches!(measure_layer(&traj, &u, &p), Err(Error::Data(_))));
    }
}
