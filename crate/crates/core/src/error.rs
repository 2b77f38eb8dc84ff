use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("item index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },

    /// The exhaustive decoder refuses instances with too many candidate sets.
    #[error("instance too large for exhaustive search: C({n}, {d}) exceeds {limit}")]
    TooLarge { n: usize, d: usize, limit: u64 },

    #[error("no candidate set has finite likelihood for the observed outcomes")]
    InconsistentOutcomes,

    #[error("sweep point {index}: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for guard violations (instance size limits) as opposed to
    /// domain or usage errors.
    pub fn is_guard(&self) -> bool {
        match self {
            Error::TooLarge { .. } => true,
            Error::SweepPoint { source, .. } => source.is_guard(),
            _ => false,
        }
    }
}
