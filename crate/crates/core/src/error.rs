use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("not a square: {0}")]
    NotASquare(String),
    #[error("coprimality violated: {0}")]
    NotCoprime(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("infeasible enumeration: about {estimate} points exceeds cap {cap}")]
    Infeasible { estimate: u128, cap: u128 },
    #[error("integrand not constant at the declared scale: {0}")]
    ConstancyViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Refuse an enumeration whose size exceeds `cap`.
pub fn guard(estimate: u128, cap: u128) -> Result<()> {
    if estimate > cap {
        Err(Error::Infeasible { estimate, cap })
    } else {
        Ok(())
    }
}
