use thiserror::Error;

use crate::solver::SolutionRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite function value {value} at node {node} (x = {x})")]
    Evaluation { node: usize, x: f64, value: f64 },

    #[error("stiffness assembly failed: adaptive quadrature did not converge for element pair offset {offset} (estimated error {error:e})")]
    Assembly { offset: usize, error: f64 },

    #[error("antiderivative quadrature budget exhausted: achieved tolerance {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("ladder exhausted: found {found} of {requested}")]
    LadderExhausted { found: usize, requested: usize },

    #[error("ladder certificate failed: g > 0 at t = {t} inside [{delta}, {eta}]")]
    LadderCertificate { t: f64, delta: f64, eta: f64 },

    #[error("no start converged within {max_iter} iterations (best projected-gradient norm {})", best.pg_norm)]
    NonConvergence { max_iter: usize, best: Box<SolutionRecord> },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 2 for configuration and argument problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Io { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
