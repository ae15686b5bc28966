use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or mismatched dimensions.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed input data (NaN entries, length mismatch, unparsable files).
    #[error("invalid data: {0}")]
    Data(String),

    /// A measurement protocol that would need data outside the simulated run.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// An iterative solver hit its iteration cap.
    #[error("{operation} did not converge after {iterations} iterations (residual {residual:e})")]
    Numerical {
        operation: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A random weight draw was too degenerate to be rescaled.
    #[error("layer {layer}: {matrix} matrix is degenerate ({quantity} = {value:e})")]
    Init {
        layer: usize,
        matrix: &'static str,
        quantity: &'static str,
        value: f64,
    },

    #[error("realization rho={rho} seed={seed}: {source}")]
    Realization {
        rho: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure: 1 for validation problems, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Init { .. } => 2,
            Error::Realization { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Data(_) | Error::Protocol(_) | Error::Io { .. } => 1,
        }
    }
}
