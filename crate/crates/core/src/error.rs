use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("search budget of {budget} node expansions exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("retries exhausted after {attempts} attempts: {reason}")]
    RetriesExhausted { attempts: u32, reason: String },
    #[error("stage `{stage}` failed: {reason}")]
    Stage { stage: String, reason: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn stage(stage: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            reason: reason.into(),
        }
    }

    /// Budget and retry exhaustion are "try again bigger" outcomes rather than answers.
    pub fn is_exhaustion(&self) -> bool {
        matches!(
            self,
            Error::BudgetExhausted { .. } | Error::RetriesExhausted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
