use thiserror::Error;

/// Errors raised by the workbench operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    OutOfDomain(Vec<f64>),
    #[error("invalid branch index {index} (valid: {valid})")]
    InvalidBranch { index: usize, valid: String },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("grid too coarse: {got} points per axis, need at least {min}")]
    GridTooCoarse { got: usize, min: usize },
    #[error("model `{0}` has no skew factor")]
    NoSkewFactor(String),
    #[error("branch words have unequal lengths ({0} vs {1})")]
    UnequalWords(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("truncation tail bound {bound:e} exceeds tolerance {tol:e}")]
    Truncation { bound: f64, tol: f64 },
    #[error("power iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no admissible constants: {0}")]
    NoAdmissibleConstants(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rejection sampling efficiency {0:.4} below 1%")]
    RejectionEfficiency(f64),
    #[error("local product undefined: {0}")]
    LocalProduct(String),
    #[error("invalid model description: {0}")]
    ModelSpec(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
