use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    /// A computation produced a non-finite or degenerate intermediate.
    #[error("numeric failure in {component} at step {step}: {detail}")]
    NumericFailure {
        component: String,
        step: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn numeric(component: impl Into<String>, step: usize, detail: impl Into<String>) -> Self {
        Error::NumericFailure {
            component: component.into(),
            step,
            detail: detail.into(),
        }
    }
}
