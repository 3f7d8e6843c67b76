use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypothesis violation at mode {k}: {reason}")]
    HypothesisViolation { k: usize, reason: String },

    #[error("no closed form for {0}")]
    UnsupportedClosedForm(String),

    #[error("quadrature failed to converge: achieved error estimate {achieved:e}")]
    QuadratureFailure { achieved: f64 },

    #[error("moment problem infeasible: mode {k} has zero coupling but nonzero data {value:e}")]
    RankViolation { k: usize, value: f64 },

    #[error("moment solve badly conditioned: relative residual {residual:e} (condition estimate {condition:e})")]
    Conditioning { residual: f64, condition: f64 },

    #[error("integration did not converge: successive-refinement difference {achieved:e} after {levels} refinements")]
    Integration { achieved: f64, levels: usize },

    #[error("control loop diverged at stage {stage}")]
    Divergence { stage: usize },

    #[error("control loop stopped at stage {stage}: {source}")]
    StageFailure {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("time step too large: fold applied more than twice in {fraction:.4}% of steps")]
    StepSize { fraction: f64 },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Domain(_) | Error::Dimension { .. } => 2,
            Error::HypothesisViolation { .. }
            | Error::RankViolation { .. }
            | Error::Precondition(_) => 3,
            Error::Conditioning { .. }
            | Error::UnsupportedClosedForm(_)
            | Error::QuadratureFailure { .. }
            | Error::Divergence { .. } => 4,
            Error::Integration { .. } | Error::StepSize { .. } => 5,
            Error::StageFailure { source, .. } => source.exit_code(),
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
