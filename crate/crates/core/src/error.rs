use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("zero vector or operator has no defined global phase")]
    ZeroInput,

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("operator is not unitary (max |A^dag A - I| = {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not traceless (|tr| = {0:e})")]
    NotTraceless(f64),

    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("readout settings are rank deficient: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("theory matrix is identically zero")]
    ZeroTheory,

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario key `{key}`: {message}")]
    InvalidScenario { key: String, message: String },

    #[error("capability violation: {operator} attempted at {location}")]
    CapabilityViolation { operator: String, location: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
