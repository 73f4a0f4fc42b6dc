use thiserror::Error;

/// Errors raised by simulation, filtering, and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric blow-up at particle {particle}, substep {substep}")]
    NumericBlowUp { particle: usize, substep: usize },

    #[error("no coarser level below level 0")]
    NoCoarserLevel,

    #[error("total weight collapse at time step {step}")]
    WeightCollapse { step: usize },

    #[error("weight degeneracy on {side} side of the increment estimator")]
    WeightDegeneracy { side: &'static str },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("singular innovation covariance at step {0}")]
    Singular(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("chain aborted: {0}")]
    ChainAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numeric failure, 4 degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::NumericOverflow(_)
            | Error::NumericBlowUp { .. }
            | Error::Domain(_)
            | Error::Singular(_)
            | Error::NoCoarserLevel => 3,
            Error::DegenerateMeasure(_)
            | Error::WeightCollapse { .. }
            | Error::WeightDegeneracy { .. }
            | Error::InsufficientSamples(_)
            | Error::InsufficientPoints(_)
            | Error::ChainAborted(_) => 4,
            Error::Io(_) => 3,
        }
    }
}
