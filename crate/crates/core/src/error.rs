use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into domain failures (a hypothesis of the construction
/// does not hold) and malformed input; [`Error::is_domain`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field family is empty")]
    EmptyFamily,
    #[error("duplicate field label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown field label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid mismatch: {0} vs {1} samples")]
    GridMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed rational `{0}`")]
    BadRational(String),
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("lift is not a circle diffeomorphism: {0}")]
    NotADiffeomorphism(String),
    #[error("family is not bracket generating up to mode {modes} (depth {depth})")]
    NotBracketGenerating { modes: usize, depth: usize },
    #[error("step budget exhausted with error {achieved:.3e} > {epsilon:.3e}")]
    BudgetExhausted { achieved: f64, epsilon: f64 },
    #[error("convex body is unbounded")]
    Unbounded,
    #[error("convex body is not symmetric")]
    NotSymmetric,
    #[error("inconsistent vertex list: {0}")]
    InconsistentVertices(String),
    #[error("sets intersect (distance {0:.3e})")]
    SetsIntersect(f64),
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
}

impl Error {
    /// True when the failure is a violated mathematical hypothesis rather than bad input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NotBracketGenerating { .. }
                | Error::BudgetExhausted { .. }
                | Error::SetsIntersect(_)
                | Error::InvalidSeed(_)
                | Error::Unbounded
                | Error::NotSymmetric
                | Error::IntegrationFailure { .. }
                | Error::NotADiffeomorphism(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
