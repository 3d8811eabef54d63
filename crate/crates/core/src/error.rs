use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {value} outside domain ({requirement})")]
    Domain {
        function: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("index {index} out of range for {len} covariates")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid CDF evaluation: {0}")]
    InvalidCdf(String),

    #[error("chain contains no draws")]
    EmptyChain,

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64, requirement: &'static str) -> Self {
        Error::Domain {
            function,
            value,
            requirement,
        }
    }
}
