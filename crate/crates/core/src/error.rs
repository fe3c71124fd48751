use thiserror::Error;

/// Errors raised by the saddle dynamics library.
#[derive(Debug, Error)]
pub enum SsdError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Gram-Schmidt hit a (numerically) linearly dependent direction.
    #[error("degenerate frame: direction {index} has residual norm {norm:e} after projection")]
    DegenerateFrame { index: usize, norm: f64 },

    #[error("unknown problem `{name}`; available: {}", available.join(", "))]
    UnknownProblem {
        name: String,
        available: Vec<String>,
    },

    #[error("force evaluation produced a non-finite value at {0}")]
    NonFinite(String),

    #[error("trajectory diverged at step {step}: |x| = {norm:e}")]
    Divergence { step: usize, norm: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SsdError>,
    },

    #[error("ladder entry tau = {tau:e}: {source}")]
    AtTau {
        tau: f64,
        #[source]
        source: Box<SsdError>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SsdError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        SsdError::Input(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            // already carries its step
            e @ SsdError::Divergence { .. } | e @ SsdError::AtStep { .. } => e,
            e => SsdError::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn at_tau(self, tau: f64) -> Self {
        SsdError::AtTau {
            tau,
            source: Box::new(self),
        }
    }

    /// True for input/lookup errors, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        match self {
            SsdError::Input(_)
            | SsdError::DimensionMismatch { .. }
            | SsdError::UnknownProblem { .. } => true,
            SsdError::AtStep { source, .. } | SsdError::AtTau { source, .. } => {
                source.is_input_error()
            }
            _ => false,
        }
    }
}

pub type Result<T, E = SsdError> = std::result::Result<T, E>;
