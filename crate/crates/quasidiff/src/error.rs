//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation
    /// (non-finite input, parameter out of its stated range, ...).
    #[error("input domain: {0}")]
    InputDomain(String),

    /// A numeric operation received data it cannot handle (asymmetric matrix
    /// where a symmetric one is required, indefinite matrix, ...).
    #[error("numeric domain: {0}")]
    NumericDomain(String),

    /// The simulated state became non-finite.
    #[error("simulation diverged at step {step}: {detail}")]
    Simulation { step: u64, detail: String },

    /// A documented precondition of an estimator or verifier was violated.
    #[error("precondition: {0}")]
    Precondition(String),

    /// A payoff returned a non-finite value, breaking the bounded-Borel contract.
    #[error("payoff contract violated: payoff returned {value} at sample {index}")]
    PayoffContract { value: f64, index: u64 },

    /// Too much Monte Carlo mass was lost to censoring for the estimate to be used.
    #[error("reliability: {0}")]
    Reliability(String),

    /// A regression fit had no usable data (all pairs under the noise floor).
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    /// Scenario config could not be parsed.
    #[error("config parse error at line {line}: {detail}")]
    ConfigParse { line: usize, detail: String },

    /// A name was not found in a registry (field family, scenario, payoff).
    #[error("registry: {0}")]
    Registry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericDomain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
