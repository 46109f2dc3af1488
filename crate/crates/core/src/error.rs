use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("no collision-free candidate among {evaluated} evaluated")]
    NoFeasibleCandidate { evaluated: usize },
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("planner failed: {0}")]
    Planner(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
