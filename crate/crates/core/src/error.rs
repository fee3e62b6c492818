use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input; `row` is the 1-based data row (header excluded) when known.
    #[error("parse error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Parse { row: Option<usize>, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("latent factor training diverged at epoch {epoch} (learning rate eta = {eta}); lower eta")]
    Divergence { eta: f64, epoch: usize },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular correlation matrix (conditioning set of size {0})")]
    Singular(usize),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad user input (exit code 2 in the CLI).
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Validation(_) => true,
            Error::Block { source, .. } => source.is_user_error(),
            _ => false,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let row = err.position().map(|p| p.line().saturating_sub(1) as usize);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Parse {
                row,
                message: format!("{kind:?}"),
            },
        }
    }
}
