use thiserror::Error;

use crate::pairwise::PartitionResult;

/// Invalid instances, subsets and file contents.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("winner {winner} is not a member of the comparison set")]
    WinnerNotInSubset { winner: usize },
    #[error("comparison set has {size} members, expected between 2 and {max}")]
    SetSize { size: usize, max: usize },
    #[error("item {index} out of range for {n} items")]
    OutOfRange { index: usize, n: usize },
    #[error("duplicate item {index} in comparison set")]
    Duplicate { index: usize },
    #[error("zero observations on edge; label is undefined")]
    NoObservations,
    #[error("{0}")]
    Parse(String),
}

/// Failures raised while an algorithm is running.
#[derive(Debug, Clone, Error)]
pub enum RankError {
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The hard query budget would be exceeded by the next batch.
    #[error("query budget exhausted: {used} queries used, limit {limit}")]
    BudgetExhausted {
        used: u64,
        limit: u64,
        partial: Option<PartitionResult>,
    },
    /// A caller-imposed phase cap (doubling driver) was reached. Not fatal to
    /// the overall run.
    #[error("phase cap reached: {used} queries used, cap {cap}")]
    PhaseCap { used: u64, cap: u64 },
    /// The empirical classification contradicted itself (for example more
    /// confident-top items than `k`). Happens only when a low-probability
    /// concentration event fails.
    #[error("inconsistent classification: {0}")]
    Inconsistent(String),
    /// An internal invariant was breached.
    #[error("internal invariant breached: {0}")]
    Internal(String),
}

impl RankError {
    pub fn is_budget(&self) -> bool {
        matches!(self, RankError::BudgetExhausted { .. })
    }
}
