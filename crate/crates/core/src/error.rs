use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("field has {got} values but the grid has {expected} cells")]
    FieldSize { expected: usize, got: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("negative input `{name}` = {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("theta = {theta} is not above the threshold {threshold} for N = {dim}")]
    BelowThetaThreshold { theta: f64, threshold: f64, dim: u32 },

    #[error("weights p = {p}, k = {k} violate k > sqrt(p)(p+1)/2 = {threshold}")]
    WeightsBelowThreshold { p: f64, k: f64, threshold: f64 },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("positivity violated: {field} = {value:e} at cell {index}, step {step}")]
    Positivity {
        field: &'static str,
        value: f64,
        index: usize,
        step: usize,
    },

    #[error("non-finite accumulator `{name}` at t = {time}: {dump}")]
    NonFiniteAccumulator {
        name: &'static str,
        time: f64,
        dump: String,
    },

    #[error("trajectory too coarse: snapshot spacing {spacing} exceeds {limit}")]
    CadenceTooCoarse { spacing: f64, limit: f64 },

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
