use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("malformed frame: {0}")]
    Framing(String),
    #[error("transport error: {0}")]
    Transport(#[from] std::io::Error),
    #[error("correlated randomness exhausted: {0}")]
    Resource(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
