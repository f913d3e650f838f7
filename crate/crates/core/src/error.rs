use thiserror::Error;

use crate::io::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown coefficient preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameters for preset `{preset}`: {reason}")]
    InvalidParameter { preset: &'static str, reason: String },

    #[error("coefficient field is not elliptic: estimated constant {alpha:e} <= 0")]
    NotElliptic { alpha: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("lattice mismatch: expected {expected}, found {found}")]
    LatticeMismatch { expected: usize, found: usize },

    #[error("missing corrector chi_{i}{k}")]
    MissingCorrector { i: usize, k: usize },

    #[error("effective tensor violates major symmetry by {violation:e}")]
    TensorNotSymmetric { violation: f64 },

    #[error("effective tensor is not elliptic: smallest eigenvalue {alpha0:e}")]
    TensorNotElliptic { alpha0: f64 },

    #[error("incompatible trajectories: {0}")]
    IncompatibleTrajectories(String),

    #[error("field dump: {0}")]
    FieldDump(#[from] crate::io::field_dump::DumpError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of an iterative or direct solver, as opposed to bad
    /// input. The command line maps the two classes onto different exit codes.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::SingularSystem(_)
                | Error::TensorNotElliptic { .. }
                | Error::TensorNotSymmetric { .. }
        )
    }
}
