use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates the documented contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("projection failed: {0}")]
    Projection(String),

    #[error("solver did not converge: {0}")]
    Solver(String),

    /// Flow aborted; carries the trajectory computed so far.
    #[error("flow aborted at step {step}: {message}")]
    FlowAborted {
        step: usize,
        message: String,
        partial: Box<crate::flow::Trajectory>,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("insufficient history: {0}")]
    History(String),

    /// Config validation error carrying the offending field path.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
