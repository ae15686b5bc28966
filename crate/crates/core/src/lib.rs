//! Deep echo state networks and layer-wise short-term memory capacity.
//!
//! The crate builds stacks of untrained tanh reservoirs, trains one linear
//! readout per (layer, delay) pair and reports each layer's forgetting curve.
//! [`experiment`] sweeps spectral radii and network seeds and writes the
//! results as CSV/JSON tables and SVG charts.

pub mod error;
pub mod experiment;
pub mod mc_task;
pub mod numerics;
pub mod reservoir;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use experiment::{
    aggregate, emit_plots, emit_results, run_realization, run_sweep, AggregateRecord, OutputFormat,
    RunManifest, SweepConfig, SweepFailure, SweepOutput, SweepRecord,
};
pub use mc_task::{McProtocol, McResult};
pub use numerics::Matrix;
pub use reservoir::{init_deep_esn, DeepEsn, DeepEsnConfig, LayerTrajectory, NetworkState};
