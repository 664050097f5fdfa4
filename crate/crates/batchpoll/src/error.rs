use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PollingError {
    #[error("unstable model: total load {0} is not below 1")]
    Unstable(f64),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("batch support is empty")]
    EmptyBatchSupport,
    #[error("invalid batch support: {0}")]
    InvalidBatchSupport(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no batch in the support starts service at queue {start} and ends at queue {end}")]
    EmptyConditioningSet { start: usize, end: usize },
    #[error("invalid batch vector: {0}")]
    InvalidBatch(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("{0} has no transform or sampler (moments-only distribution)")]
    TransformUnavailable(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PollingError>;
