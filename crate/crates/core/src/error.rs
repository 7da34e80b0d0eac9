use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A waterline update would leave a sole subcarrier with non-positive power.
    #[error("infeasible waterline {waterline:e} W (must exceed {floor:e} W)")]
    InfeasibleWaterline { waterline: f64, floor: f64 },

    #[error("candidate rejected: {0}")]
    CandidateRejected(&'static str),

    #[error("no sign change on [{lo:e}, {hi:e}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("every active-set branch of the oracle is infeasible")]
    OracleInfeasible,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
