use thiserror::Error;

use crate::fit::Regime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("chain length must be at least 1")]
    ZeroLength,

    #[error("chain length {n} exceeds the exact-computation cap of {cap}")]
    TooLong { n: usize, cap: usize },

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("{operation} requires the {expected} regime, found {found}")]
    WrongRegime {
        operation: &'static str,
        expected: &'static str,
        found: Regime,
    },

    #[error("degenerate binomial fit: m_tilde = {m_tilde}, m = {m}, theta = {theta}")]
    DegenerateFit { m_tilde: f64, m: u64, theta: f64 },

    #[error("mass function is not a probability law: {0}")]
    NotNormalized(String),

    /// A proven identity failed to hold numerically; signals a bug.
    #[error("internal consistency violation: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie strictly between 0 and 1",
        })
    }
}
