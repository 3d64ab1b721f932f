use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("points are not ordered: {0}")]
    Order(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("kind mismatch: {0}")]
    Kind(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("requested depth is not reached: {0}")]
    Depth(String),
    #[error("axiom {axiom} violated: {detail}")]
    Axiom { axiom: &'static str, detail: String },
    #[error("bad data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
