//! Active top-k identification under the multinomial logit (MNL) choice model.
//!
//! The crate is organised around a single query boundary, [`Environment`],
//! which owns the hidden label permutation and counts every oracle call.
//! Algorithms see labels only:
//!
//! - [`pairwise`] implements the graph-labelling elimination algorithm over
//!   size-2 comparisons.
//! - [`multiwise`] implements hyperedge sampling with indicator statistics and
//!   the doubling-Q driver that falls back to [`pairwise`].
//! - [`complexity`] evaluates the instance-dependent sample complexity
//!   expressions.
//! - [`verify`] holds brute-force and statistical oracles used by tests and by
//!   the `verify` CLI subcommand.
//! - [`experiment`] generates instances and runs seeded batches to CSV.
//!
//! Ranks and labels are zero-based: rank 0 is the item with the largest score.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod complexity;
pub mod driver;
pub mod env;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod model;
pub mod multiwise;
pub mod pairwise;
pub mod rng;
pub mod verify;

pub use driver::{top_k, Algorithm, ResolvedAlgorithm, RunFailure, RunReport, TopKConfig, TraceRow};
pub use env::{Environment, QueryLedger};
pub use error::{ModelError, RankError};
pub use exec::Exec;
pub use model::{choice_prob, make_labeled, Instance, Label, LabeledInstance};
