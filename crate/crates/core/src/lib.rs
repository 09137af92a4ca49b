//! Spectral graph rewiring via quantum diffusion kernels.
//!
//! The pipeline: load a graph bundle, build the symmetrically normalized
//! operator `L = D^{-1/2} (A + I) D^{-1/2}`, compute a band of its eigenpairs
//! (dense for small graphs, folded-spectrum LOBPCG for interior bands),
//! assemble a filter-weighted kernel, sparsify and renormalize it, and train
//! a GCN on the rewired propagation matrix. Side modules cover heat vs.
//! Schrödinger dynamics, spectral homophily curves, and a random-search
//! sweep harness.

pub mod analysis;
pub mod dynamics;
pub mod gnn;
pub mod graph;
pub mod kernel;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParam { name: &'static str, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dense eigensolver limited to {limit} vertices, got {n}")]
    DenseLimitExceeded { n: usize, limit: usize },

    #[error(
        "eigensolver did not converge (retry applied: {retry_applied}): \
         {unconverged} of {requested} pairs above tolerance, worst residual {worst_residual:.3e}"
    )]
    EigensolveFailed {
        requested: usize,
        unconverged: usize,
        worst_residual: f64,
        retry_applied: bool,
    },

    #[error("linear solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolveFailed { iterations: usize, residual: f64 },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainDiverged { epoch: usize },

    #[error("corrupt {what}: {message}")]
    CorruptArtifact { what: &'static str, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
