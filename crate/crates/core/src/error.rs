use thiserror::Error;

/// Every failure the lab can report.
///
/// Variants split into two families: problems with the requested setup
/// (see [`LabError::is_config`]) and numerical failures of a solver that was
/// given a well-formed request.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("not hyperbolic: {0}")]
    NotHyperbolic(String),
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("holonomy undefined: {0}")]
    HolonomyUndefined(String),
    #[error("transversality lost: {0}")]
    Transversality(String),
    #[error("coherence failure: {0}")]
    Coherence(String),
    #[error("amalgam undefined: {0}")]
    AmalgamUndefined(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("unknown gallery `{0}`")]
    UnknownGallery(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl LabError {
    /// True when the error describes a bad request rather than a solver failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            LabError::Config(_)
                | LabError::UnknownGallery(_)
                | LabError::NotHyperbolic(_)
                | LabError::DegenerateInput(_)
                | LabError::ConditionViolated(_)
                | LabError::DimensionMismatch { .. }
        )
    }
}

impl LabError {
    /// Append context to the message of a string-carrying variant.
    pub fn context(self, ctx: &str) -> Self {
        use LabError::*;
        let add = |m: String| format!("{m} ({ctx})");
        match self {
            Domain(m) => Domain(add(m)),
            OutOfRange(m) => OutOfRange(add(m)),
            NonConvergence(m) => NonConvergence(add(m)),
            Singular(m) => Singular(add(m)),
            NotHyperbolic(m) => NotHyperbolic(add(m)),
            ConditionViolated(m) => ConditionViolated(add(m)),
            HolonomyUndefined(m) => HolonomyUndefined(add(m)),
            Transversality(m) => Transversality(add(m)),
            Coherence(m) => Coherence(add(m)),
            AmalgamUndefined(m) => AmalgamUndefined(add(m)),
            InsufficientData(m) => InsufficientData(add(m)),
            DegenerateInput(m) => DegenerateInput(add(m)),
            Config(m) => Config(add(m)),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
