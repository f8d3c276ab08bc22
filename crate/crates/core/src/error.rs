use thiserror::Error;

/// Every failure the library can report. The CLI maps variants to exit codes.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("key-level error: expected level {expected}, found {found}")]
    KeyLevel { expected: usize, found: usize },
    #[error("noise error: {0}")]
    Noise(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("flow error: {0}")]
    Flow(String),
    #[error("measurement error: {0}")]
    Measurement(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("depth error: {0}")]
    Depth(String),
    #[error("schedule error: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by exceeding a size or resource bound.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::Size(_) | Error::Depth(_))
    }
}
