use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is singular at x = {at}")]
    Domain { what: &'static str, at: f64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigen-iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("checkpoint parse error at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
