use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// The requested Rényi order exceeds the admissible cap of the subsampling bound.
    #[error("order {eta} exceeds admissible cap {cap:.4}")]
    OrderInadmissible { eta: u32, cap: f64 },

    #[error("no admissible Rényi order remains for conversion")]
    NoAdmissibleOrder,

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
