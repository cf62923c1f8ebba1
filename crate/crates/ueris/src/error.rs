use crate::scenario::ConfigViolation;

/// Unified error type for the crate.
///
/// Configuration problems are reported in bulk (`InvalidConfig` carries every
/// violated rule, not just the first); everything else is a single cause.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("search space has {required} candidates, exceeding the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("objective became non-finite during alternating optimization at iteration {iteration}")]
    NonFiniteObjective {
        iteration: usize,
        trace: Box<crate::ao::AoTrace>,
    },

    #[error("needed {needed} cooperating handsets but only {achieved} completed estimation")]
    SelectionShortfall { needed: usize, achieved: usize },

    #[error(
        "far-field approximation not justified: distance/offset ratio {ratio:.1} below {minimum}"
    )]
    FarFieldViolated { ratio: f64, minimum: f64 },

    #[error("unknown trial id '{0}' (expected \"<arm>:<trial>\")")]
    UnknownTrial(String),

    #[error("experiment failed: {failed} of {total} trials errored (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("malformed channel container: {0}")]
    BadContainer(String),

    #[error("config file error: {0}")]
    ConfigFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
