use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("reference value has zero magnitude")]
    ZeroReference,

    #[error("prefix of size {requested} requested from a realization of size {available}")]
    PrefixTooLong { requested: usize, available: usize },

    #[error("epsilon {0} outside (0, 1/e)")]
    EpsilonOutOfRange(f64),

    #[error("missing moment data: {0}")]
    MissingMoments(&'static str),

    #[error("enumeration of {outcomes} outcomes exceeds the limit of {limit}")]
    InstanceTooLarge { outcomes: u128, limit: u128 },

    #[error("plan does not match model: {0}")]
    PlanMismatch(String),
}
