use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("channel parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unsolvable fixed-entropy step: target entropy {target} exceeds reachable {reachable}")]
    Unsolvable { target: f64, reachable: f64 },
    #[error("did not converge: {0}")]
    NonConvergent(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
