//! Error type shared by all solvers and I/O routines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent sizes between model pieces or between a model and its input.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid user-facing configuration (bad parameter, aliasing guard, missing field).
    #[error("configuration error: {0}")]
    Config(String),

    /// A matrix that must be symmetric positive definite failed factorization.
    #[error("matrix not positive definite: {0}")]
    NotSpd(String),

    /// A linear solve hit a (numerically) singular system.
    #[error("singular linear system: {0}")]
    Singular(String),

    /// An iterative solver ran out of iterations.
    #[error("{context}: no convergence after {iterations} iterations, residual {residual:.3e}")]
    NonConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    /// A displacement left the admissible range of a precomputed manifold or oracle.
    #[error("admissible range violated: {0}")]
    Range(String),

    #[error("i/o error: {0}")]
    Io(String),

    /// Malformed file contents (matrix market, tensor, trajectory, CSV).
    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 non-convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) => 2,
            Error::NonConvergence { .. } | Error::Singular(_) | Error::NotSpd(_) => 3,
            Error::Io(_) | Error::Format(_) => 4,
            Error::Range(_) => 3,
        }
    }
}
