//! Error taxonomy shared by the whole engine.

use thiserror::Error;

/// Engine-wide error type.
///
/// The variants separate who is at fault: `Config` for broken grammars or
/// type graphs, `Input` for broken histories/modifications/state files,
/// `NotApplicable` for rule applications whose preconditions fail,
/// `Contract` for violated internal API contracts (caller bugs),
/// `Format` for malformed serialized data, and `CrossCheck` for benchmark
/// integrity failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Grammar or type-graph level misconfiguration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid runtime input (history, modification sequence, state).
    #[error("input error: {0}")]
    Input(String),
    /// A rule application's precondition does not hold.
    #[error("rule not applicable: {0}")]
    NotApplicable(String),
    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Serialized data cannot be parsed or fails schema validation.
    #[error("format error: {0}")]
    Format(String),
    /// Benchmark strategies disagreed on a result they must agree on.
    #[error("strategy cross-check failed: {0}")]
    CrossCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn not_applicable(msg: impl Into<String>) -> Self {
        Error::NotApplicable(msg.into())
    }
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
    pub fn cross_check(msg: impl Into<String>) -> Self {
        Error::CrossCheck(msg.into())
    }
}
