use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch ({context}): expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value ({0})")]
    NonFinite(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("model: {0}")]
    Model(String),

    #[error("region weights must sum to 1 in probabilistic mode, got {0}")]
    WeightSum(f64),

    #[error("region budget exceeded at layer {layer}: {regions} regions over budget {budget}")]
    BudgetExceeded {
        layer: usize,
        regions: usize,
        budget: usize,
    },

    #[error("operation requires a probabilistic state")]
    ProbabilisticRequired,

    #[error("invalid property: {0}")]
    Property(String),

    #[error("timed out after {0:.1}s")]
    Timeout(f64),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}
