use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no leading form of zero")]
    NoLeadingForm,

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration of {needed} points exceeds the budget of {budget} (raise --budget)")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis failed: {0}")]
    Hypothesis(String),

    #[error("dimension ambiguous, increase k or q (growth estimate {growth}, slicing disagrees)")]
    DimensionAmbiguous { growth: i32 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with a description of where it happened, e.g. the
    /// sweep point that failed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
