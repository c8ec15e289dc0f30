use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{0}: input is empty")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite gradient in `{tensor}` (element {index}: {value})")]
    NonFiniteGradient { tensor: String, index: usize, value: f64 },

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("replay buffer holds {have} transitions, {want} requested")]
    Underfilled { have: usize, want: usize },

    #[error("training diverged at frame {frame}: {detail}")]
    Diverged { frame: usize, detail: String },

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
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    /// Wraps the error with the name of the subsystem that raised it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
