//! Deep stacked echo state network: untrained tanh layers where layer 1 is
//! driven by the external input and every higher layer by the freshly updated
//! state of the layer below it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matvec_into, operator_norm_2, spectral_radius, Matrix};
use crate::rng::{derive_stream, RngStream};

/// Label of the stream all network weights are drawn from.
pub const WEIGHTS_STREAM: &str = "reservoir-weights";

/// Raw draws whose norm or spectral radius fall below this cannot be rescaled.
const DEGENERATE_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepEsnConfig {
    pub n_layers: usize,
    pub units_per_layer: usize,
    pub input_dim: usize,
    /// Spectral radius every recurrent matrix is rescaled to.
    pub rho_target: f64,
    /// Operator 2-norm every input / inter-layer matrix is rescaled to.
    pub coupling_norm: f64,
}

impl DeepEsnConfig {
    /// 10 layers of 100 units, scalar input, unit coupling norm.
    pub fn with_rho(rho_target: f64) -> Self {
        DeepEsnConfig {
            n_layers: 10,
            units_per_layer: 100,
            input_dim: 1,
            rho_target,
            coupling_norm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::config("n_layers must be at least 1"));
        }
        if self.units_per_layer == 0 {
            return Err(Error::config("units_per_layer must be at least 1"));
        }
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be at least 1"));
        }
        if !(self.rho_target.is_finite() && self.rho_target > 0.0) {
            return Err(Error::config(format!(
                "rho_target must be finite and positive, got {}",
                self.rho_target
            )));
        }
        if !(self.coupling_norm.is_finite() && self.coupling_norm > 0.0) {
            return Err(Error::config(format!(
                "coupling_norm must be finite and positive, got {}",
                self.coupling_norm
            )));
        }
        Ok(())
    }
}

/// Weights of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Input (layer 1) or inter-layer coupling matrix, `N_R x N_U` or `N_R x N_R`.
    pub input: Matrix,
    /// Recurrent matrix, `N_R x N_R`.
    pub recurrent: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepEsn {
    config: DeepEsnConfig,
    layers: Vec<Layer>,
}

/// Draws and rescales a network.
///
/// Entries come from a single `WEIGHTS_STREAM` stream, uniform in `[-1, 1)`,
/// in the order: for each layer ascending, the input matrix row-major, then
/// the recurrent matrix row-major.
pub fn init_deep_esn(config: &DeepEsnConfig, seed: u64) -> Result<DeepEsn> {
    config.validate()?;
    let mut rng = derive_stream(seed, WEIGHTS_STREAM);
    let n = config.units_per_layer;
    let mut layers = Vec::with_capacity(config.n_layers);
    for index in 0..config.n_layers {
        let drive_dim = if index == 0 { config.input_dim } else { n };
        let mut input = draw_matrix(&mut rng, n, drive_dim);
        let mut recurrent = draw_matrix(&mut rng, n, n);

        let norm = operator_norm_2(&input)?;
        if norm < DEGENERATE_SCALE {
            return Err(Error::Init {
                layer: index + 1,
                matrix: "input",
                quantity: "operator 2-norm",
                value: norm,
            });
        }
        input.scale_in_place(config.coupling_norm / norm);

        let radius = spectral_radius(&recurrent)?;
        if radius < DEGENERATE_SCALE {
            return Err(Error::Init {
                layer: index + 1,
                matrix: "recurrent",
                quantity: "spectral radius",
                value: radius,
            });
        }
        recurrent.scale_in_place(config.rho_target / radius);

        layers.push(Layer { input, recurrent });
    }
    Ok(DeepEsn {
        config: *config,
        layers,
    })
}

fn draw_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
}

impl DeepEsn {
    /// Assembles a network from explicit weights (no rescaling applied).
    pub fn from_layers(config: DeepEsnConfig, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() != config.n_layers {
            return Err(Error::config(format!(
                "expected {} layers, got {}",
                config.n_layers,
                layers.len()
            )));
        }
        let n = config.units_per_layer;
        for (i, layer) in layers.iter().enumerate() {
            let drive_dim = if i == 0 { config.input_dim } else { n };
            if layer.input.rows() != n || layer.input.cols() != drive_dim {
                return Err(Error::config(format!(
                    "layer {}: input matrix is {}x{}, expected {n}x{drive_dim}",
                    i + 1,
                    layer.input.rows(),
                    layer.input.cols()
                )));
            }
            if layer.recurrent.rows() != n || layer.recurrent.cols() != n {
                return Err(Error::config(format!(
                    "layer {}: recurrent matrix is {}x{}, expected {n}x{n}",
                    i + 1,
                    layer.recurrent.rows(),
                    layer.recurrent.cols()
                )));
            }
        }
        Ok(DeepEsn { config, layers })
    }

    pub fn config(&self) -> &DeepEsnConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Returns a copy with layer `index` (0-based) replaced.
    pub fn with_layer(&self, index: usize, layer: Layer) -> Result<Self> {
        let mut layers = self.layers.clone();
        if index >= layers.len() {
            return Err(Error::config(format!("no layer at index {index}")));
        }
        layers[index] = layer;
        DeepEsn::from_layers(self.config, layers)
    }

    pub fn zero_state(&self) -> NetworkState {
        NetworkState {
            layers: vec![vec![0.0; self.config.units_per_layer]; self.config.n_layers],
            t: 0,
        }
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        let n = self.config.units_per_layer;
        if state.layers.len() != self.config.n_layers || state.layers.iter().any(|x| x.len() != n) {
            return Err(Error::config(format!(
                "state shape does not match a {}-layer network of {n} units",
                self.config.n_layers
            )));
        }
        Ok(())
    }

    /// One time step through the whole stack, bottom-up.
    pub fn step(&self, state: &NetworkState, u: &[f64]) -> Result<NetworkState> {
        self.check_state(state)?;
        if u.len() != self.config.input_dim {
            return Err(Error::config(format!(
                "input of length {} for input_dim {}",
                u.len(),
                self.config.input_dim
            )));
        }
        let n = self.config.units_per_layer;
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut scratch = vec![0.0; n];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; n];
            let drive: &[f64] = if i == 0 { u } else { &next[i - 1] };
            update_layer(layer, drive, &state.layers[i], &mut out, &mut scratch);
            next.push(out);
        }
        Ok(NetworkState {
            layers: next,
            t: state.t + 1,
        })
    }

    /// Runs the stack over `inputs` (`T x N_U`) from the all-zero state.
    pub fn run_sequence(&self, inputs: &Matrix) -> Result<Vec<LayerTrajectory>> {
        self.run_sequence_from(inputs, &self.zero_state())
    }

    /// Runs the stack over `inputs` from an arbitrary initial state. Produces
    /// exactly the states of repeated [`DeepEsn::step`] calls.
    pub fn run_sequence_from(
        &self,
        inputs: &Matrix,
        initial: &NetworkState,
    ) -> Result<Vec<LayerTrajectory>> {
        self.check_state(initial)?;
        if inputs.rows() == 0 {
            return Err(Error::config(
                "input sequence must contain at least one step",
            ));
        }
        if inputs.cols() != self.config.input_dim {
            return Err(Error::config(format!(
                "input sequence has {} columns, input_dim is {}",
                inputs.cols(),
                self.config.input_dim
            )));
        }
        let steps = inputs.rows();
        let n = self.config.units_per_layer;
        let mut trajectories: Vec<Matrix> = (0..self.layers.len())
            .map(|_| Matrix::zeros(steps, n))
            .collect();
        let mut current = initial.layers.clone();
        let mut next = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for t in 0..steps {
            for (i, layer) in self.layers.iter().enumerate() {
                let drive: &[f64] = if i == 0 {
                    inputs.row(t)
                } else {
                    &current[i - 1]
                };
                update_layer(layer, drive, &current[i], &mut next, &mut scratch);
                current[i].copy_from_slice(&next);
                trajectories[i].row_mut(t).copy_from_slice(&next);
            }
        }
        Ok(trajectories
            .into_iter()
            .enumerate()
            .map(|(i, states)| LayerTrajectory {
                layer: i + 1,
                states,
            })
            .collect())
    }

    /// Provenance summary of the weights (not intended for reloading).
    pub fn dump(&self, seed: u64) -> Result<NetworkDump> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                Ok(LayerDump {
                    layer: i + 1,
                    input_checksum: matrix_checksum(&l.input),
                    recurrent_checksum: matrix_checksum(&l.recurrent),
                    input_norm: operator_norm_2(&l.input)?,
                    recurrent_spectral_radius: spectral_radius(&l.recurrent)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkDump {
            config: self.config,
            seed,
            layers,
        })
    }
}

/// `out = tanh(W·drive + Ŵ·prev)`; the two products are summed entrywise after
/// both are formed.
fn update_layer(layer: &Layer, drive: &[f64], prev: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    matvec_into(&layer.input, drive, out);
    matvec_into(&layer.recurrent, prev, scratch);
    for (o, s) in out.iter_mut().zip(scratch.iter()) {
        *o = (*o + *s).tanh();
    }
}

/// FNV-1a over the little-endian bit patterns of the entries, as hex.
pub fn matrix_checksum(m: &Matrix) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.as_slice() {
        for b in v.to_bits().to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub layers: Vec<Vec<f64>>,
    pub t: usize,
}

/// States of one layer over a run, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrajectory {
    /// 1-based layer index.
    pub layer: usize,
    pub states: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDump {
    pub config: DeepEsnConfig,
    pub seed: u64,
    pub layers: Vec<LayerDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerDump {
    pub layer: usize,
    pub input_checksum: String,
    pub recurrent_checksum: String,
    pub input_norm: f64,
    pub recurrent_spectral_radius: f64,
}
