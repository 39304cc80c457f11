use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input row. `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schedule config error: {0}")]
    Config(String),

    #[error("empty inventory: {0}")]
    EmptyInventory(String),

    /// Network or transport failure while fetching a remote resource. Safe to retry.
    #[error("fetch failed (retriable): {0}")]
    Fetch(String),

    #[error("infeasible dispatch: {0}")]
    Infeasible(String),

    #[error("LP solver failed: {message} (iterations: {iterations}, slots: {slots})")]
    Solver {
        message: String,
        iterations: usize,
        slots: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad inputs or configuration rather than the
    /// environment.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Config(_)
                | Error::EmptyInventory(_)
                | Error::Infeasible(_)
                | Error::Json(_)
        )
    }
}
