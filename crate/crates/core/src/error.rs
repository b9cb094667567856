use thiserror::Error;

/// Errors surfaced by the library. Every variant carries a one-line message
/// suitable for a CLI diagnostic.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs refer to different graphs, or masks/matchings have the wrong shape.
    #[error("structural error: {0}")]
    Structural(String),
    /// A parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An exact oracle was asked to handle an instance above its size cap.
    #[error("capacity exceeded: {what} has {size}, cap is {cap}")]
    Capacity { what: String, size: usize, cap: usize },
    /// A bipartite-only routine received a graph without a valid 2-coloring.
    #[error("`{0}` requires a bipartite graph")]
    NotBipartite(String),
    /// Malformed graph text.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
