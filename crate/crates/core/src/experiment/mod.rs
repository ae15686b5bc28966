//! Sweeps over spectral radius and network seed.
//!
//! A realization is a pure function of `(rho, seed, SweepConfig)`: build the
//! network, drive it with the input signal, measure every layer. Sweeps run
//! realizations on a worker pool and merge them in a fixed
//! `(rho grid order, seed, layer)` order, so output does not depend on the
//! number of workers.

pub mod io;
pub mod plot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc_task::{generate_input, measure_layer, McProtocol, INPUT_STREAM};
use crate::numerics::Matrix;
use crate::reservoir::{init_deep_esn, DeepEsnConfig};

pub use io::{emit_results, OutputFormat, RunManifest};
pub use plot::emit_plots;

/// Network architecture without the spectral radius, which the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnShape {
    pub n_layers: usize,
    pub units_per_layer: usize,
    pub input_dim: usize,
    pub coupling_norm: f64,
}

impl Default for EsnShape {
    fn default() -> Self {
        let c = DeepEsnConfig::with_rho(1.0);
        EsnShape {
            n_layers: c.n_layers,
            units_per_layer: c.units_per_layer,
            input_dim: c.input_dim,
            coupling_norm: c.coupling_norm,
        }
    }
}

impl EsnShape {
    pub fn with_rho(&self, rho_target: f64) -> DeepEsnConfig {
        DeepEsnConfig {
            n_layers: self.n_layers,
            units_per_layer: self.units_per_layer,
            input_dim: self.input_dim,
            rho_target,
            coupling_norm: self.coupling_norm,
        }
    }
}

/// 0.1, 0.2, ..., 1.5
pub fn default_rho_grid() -> Vec<f64> {
    (1..=15).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub rho_grid: Vec<f64>,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub esn: EsnShape,
    pub protocol: McProtocol,
    /// Reuse one input signal (drawn from `base_seed`) for every realization.
    pub shared_input: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rho_grid: default_rho_grid(),
            n_realizations: 50,
            base_seed: 0,
            esn: EsnShape::default(),
            protocol: McProtocol::default(),
            shared_input: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(Error::config("rho_grid must not be empty"));
        }
        if let Some(bad) = self.rho_grid.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::config(format!(
                "rho_grid entries must be positive, got {bad}"
            )));
        }
        if self.n_realizations == 0 {
            return Err(Error::config("n_realizations must be at least 1"));
        }
        if self
            .base_seed
            .checked_add(self.n_realizations as u64 - 1)
            .is_none()
        {
            return Err(Error::config(
                "base_seed + n_realizations overflows a 64-bit seed",
            ));
        }
        if self.esn.input_dim != 1 {
            return Err(Error::config(format!(
                "esn.input_dim must be 1 for the memory capacity task, got {}",
                self.esn.input_dim
            )));
        }
        self.esn.with_rho(self.rho_grid[0]).validate()?;
        self.protocol.validate()
    }

    /// `base_seed + i` for each realization index.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_realizations as u64)
            .map(|i| self.base_seed + i)
            .collect()
    }

    pub fn expected_records(&self) -> usize {
        self.rho_grid.len() * self.n_realizations * self.esn.n_layers
    }

    fn input_for(&self, seed: u64) -> Vec<f64> {
        let input_seed = if self.shared_input {
            self.base_seed
        } else {
            seed
        };
        generate_input(&self.protocol, input_seed, INPUT_STREAM)
    }
}

/// One layer of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub rho: f64,
    pub seed: u64,
    pub layer: usize,
    pub mc_total: f64,
    pub forgetting_curve: Vec<f64>,
}

/// Realization average for one `(rho, layer)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub rho: f64,
    pub layer: usize,
    pub mc_mean: f64,
    /// Sample standard deviation over realizations (0 for a single one).
    pub mc_std: f64,
    pub curve_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

/// A sweep that stopped at a failing realization. `partial` holds the
/// records of every realization that did complete, in sweep order.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct SweepFailure {
    pub partial: Vec<SweepRecord>,
    #[source]
    pub error: Error,
}

/// Builds, runs and measures one network.
pub fn run_realization(rho: f64, seed: u64, sweep: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let with_context = |e: Error| Error::Realization {
        rho,
        seed,
        source: Box::new(e),
    };
    sweep.protocol.validate().map_err(with_context)?;
    let esn = init_deep_esn(&sweep.esn.with_rho(rho), seed).map_err(with_context)?;
    let u = sweep.input_for(seed);
    let inputs = Matrix::column(&u);
    let trajectories = esn.run_sequence(&inputs).map_err(with_context)?;
    trajectories
        .iter()
        .map(|traj| {
            let r = measure_layer(traj, &u, &sweep.protocol)?;
            Ok(SweepRecord {
                rho,
                seed,
                layer: r.layer,
                mc_total: r.mc_total,
                forgetting_curve: r.forgetting_curve,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(with_context)
}

/// Runs every `(rho, seed)` pair on `workers` threads (`<= 1` runs serially).
pub fn run_sweep(sweep: &SweepConfig, workers: usize) -> Result<SweepOutput, SweepFailure> {
    let fail = |error| SweepFailure {
        partial: Vec::new(),
        error,
    };
    sweep.validate().map_err(fail)?;
    let tasks: Vec<(f64, u64)> = sweep
        .rho_grid
        .iter()
        .flat_map(|&rho| sweep.seeds().into_iter().map(move |seed| (rho, seed)))
        .collect();

    let results: Vec<Result<Vec<SweepRecord>>> = if workers <= 1 {
        let mut out = Vec::with_capacity(tasks.len());
        for &(rho, seed) in &tasks {
            let r = run_realization(rho, seed, sweep);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| {
                fail(Error::config(format!(
                    "cannot start {workers} workers: {e}"
                )))
            })?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(rho, seed)| run_realization(rho, seed, sweep))
                .collect()
        })
    };

    let mut records = Vec::with_capacity(sweep.expected_records());
    let mut first_error = None;
    for result in results {
        match result {
            Ok(r) => records.extend(r),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(error) = first_error {
        return Err(SweepFailure {
            partial: records,
            error,
        });
    }
    let aggregates = aggregate(&records);
    Ok(SweepOutput {
        records,
        aggregates,
    })
}

/// Averages records per `(rho, layer)`. Groups follow the order in which each
/// rho first appears, then ascending layer; within a group records are summed
/// in ascending seed order.
pub fn aggregate(records: &[SweepRecord]) -> Vec<AggregateRecord> {
    let mut rhos: Vec<f64> = Vec::new();
    for r in records {
        if !rhos.iter().any(|x| x.to_bits() == r.rho.to_bits()) {
            rhos.push(r.rho);
        }
    }
    let mut out = Vec::new();
    for rho in rhos {
        let mut layers: Vec<usize> = records
            .iter()
            .filter(|r| r.rho.to_bits() == rho.to_bits())
            .map(|r| r.layer)
            .collect();
        layers.sort_unstable();
        layers.dedup();
        for layer in layers {
            let mut group: Vec<&SweepRecord> = records
                .iter()
                .filter(|r| r.rho.to_bits() == rho.to_bits() && r.layer == layer)
                .collect();
            group.sort_by_key(|r| r.seed);
            out.push(aggregate_group(rho, layer, &group));
        }
    }
    out
}

fn aggregate_group(rho: f64, layer: usize, group: &[&SweepRecord]) -> AggregateRecord {
    let n = group.len() as f64;
    let mc_mean = group.iter().fold(0.0, |acc, r| acc + r.mc_total) / n;
    let mc_std = if group.len() > 1 {
        let ss = group
            .iter()
            .fold(0.0, |acc, r| acc + (r.mc_total - mc_mean).powi(2));
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let k_max = group
        .iter()
        .map(|r| r.forgetting_curve.len())
        .min()
        .unwrap_or(0);
    let curve_mean = (0..k_max)
        .map(|k| group.iter().fold(0.0, |acc, r| acc + r.forgetting_curve[k]) / n)
        .collect();
    AggregateRecord {
        rho,
        layer,
        mc_mean,
        mc_std,
        curve_mean,
    }
}
