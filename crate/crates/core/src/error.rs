use thiserror::Error;

/// Which phase of the unit cell an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Solid,
    Fluid,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Solid => write!(f, "solid"),
            Phase::Fluid => write!(f, "fluid"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("voxel file parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{0} phase is empty")]
    EmptyPhase(Phase),

    #[error("{phase} phase is disconnected: {hint}")]
    Disconnected { phase: Phase, hint: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("incompatible Neumann data: total flux {flux:e} exceeds {limit:e}")]
    NeumannIncompatible { flux: f64, limit: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
        history: Vec<f64>,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("configuration mismatch: {0}")]
    Configuration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 input error, 3 configuration mismatch, 4 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 4,
            Error::Configuration(_) | Error::Consistency(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
