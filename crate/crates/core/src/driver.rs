//! Full top-k driver: chooses between the pairwise and multi-wise pipelines
//! and runs the doubling search over `Q` for the latter.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{ModelError, RankError};
use crate::model::{Label, LabeledInstance};
use crate::multiwise::{run_multiwise, MultiwiseConfig};
use crate::pairwise::{run_pairwise, LabelRule, PairwiseConfig, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pairwise,
    Multiwise,
    Auto,
}

impl std::str::FromStr for Algorithm {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairwise" => Ok(Algorithm::Pairwise),
            "multiwise" => Ok(Algorithm::Multiwise),
            "auto" => Ok(Algorithm::Auto),
            other => Err(ModelError::InvalidField {
                field: "algorithm",
                reason: format!("unknown algorithm `{other}`"),
            }),
        }
    }
}

/// The pipeline actually run after resolving [`Algorithm::Auto`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolvedAlgorithm {
    Pairwise,
    Multiwise,
}

impl fmt::Display for ResolvedAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResolvedAlgorithm::Pairwise => "pairwise",
            ResolvedAlgorithm::Multiwise => "multiwise",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pairwise,
    Multiwise,
}

/// Summary of one recursion level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: Phase,
    /// Doubling iteration (multi-wise driver) or 0.
    pub stream: u64,
    pub depth: usize,
    /// Items and target count entering the level.
    pub m: usize,
    pub k: usize,
    /// Pairwise: rounds run. Multi-wise: queries per subset.
    pub rounds: u64,
    pub queries: u64,
    /// Labels declared top at this level.
    pub omega_g: Vec<Label>,
    /// Labels discarded as bottom at this level.
    pub omega_b: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKConfig {
    pub algorithm: Algorithm,
    pub pairwise: PairwiseConfig,
    pub multiwise: MultiwiseConfig,
    /// Hard cap on oracle calls for the whole run.
    pub budget: u64,
}

impl TopKConfig {
    pub fn for_n(n: usize) -> Self {
        Self {
            algorithm: Algorithm::Auto,
            pairwise: PairwiseConfig::for_n(n),
            multiwise: MultiwiseConfig::for_n(n),
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Sets `kappa` for both pipelines.
    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.pairwise.kappa = kappa;
        self.multiwise = self.multiwise.with_kappa(kappa);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self.pairwise.max_total_queries = budget;
        self.multiwise.max_total_queries = budget;
        self
    }

    pub fn with_rule(mut self, rule: LabelRule) -> Self {
        self.pairwise.label_rule = rule;
        self
    }

    pub fn resolve(&self, n: usize, l: usize) -> ResolvedAlgorithm {
        match self.algorithm {
            Algorithm::Pairwise => ResolvedAlgorithm::Pairwise,
            Algorithm::Multiwise => ResolvedAlgorithm::Multiwise,
            Algorithm::Auto if self.multiwise.uses_multiwise(n, l) => ResolvedAlgorithm::Multiwise,
            Algorithm::Auto => ResolvedAlgorithm::Pairwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: ResolvedAlgorithm,
    pub returned: BTreeSet<Label>,
    pub queries_used: u64,
    pub trace: Vec<TraceRow>,
    /// `Q` of the final doubling iteration (multi-wise only).
    pub final_q: Option<u64>,
}

impl RunReport {
    pub fn success(&self, labeled: &LabeledInstance) -> bool {
        self.returned == labeled.truth()
    }

    /// No top item was ever discarded and no bottom item ever declared top.
    pub fn trace_sound(&self, labeled: &LabeledInstance) -> bool {
        self.trace.iter().all(|row| {
            row.omega_g.iter().all(|&l| labeled.is_top(l)) && row.omega_b.iter().all(|&l| !labeled.is_top(l))
        })
    }
}

/// A failed run with whatever was learned before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: RankError,
    pub partial: Box<RunReport>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} queries", self.error, self.partial.queries_used)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Finds the `k` best of `labels`.
///
/// For multi-wise runs, `Q` starts at the configured value and doubles; each
/// iteration runs the multi-wise elimination from scratch and then the
/// pairwise algorithm on what is left, capped at `Q * n / l` queries. An
/// iteration whose pairwise phase would pass the cap is abandoned.
pub fn top_k(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &TopKConfig,
) -> Result<RunReport, RunFailure> {
    let algorithm = config.resolve(labels.len(), env.l());
    let mut report = RunReport {
        algorithm,
        returned: BTreeSet::new(),
        queries_used: 0,
        trace: Vec::new(),
        final_q: None,
    };
    let result = match algorithm {
        ResolvedAlgorithm::Pairwise => run_pairwise(env, labels, k, &config.pairwise, None, 0, &mut report.trace),
        ResolvedAlgorithm::Multiwise => doubling(env, labels, k, config, &mut report),
    };
    report.queries_used = env.queries();
    match result {
        Ok(set) => {
            report.returned = set;
            Ok(report)
        }
        Err(error) => Err(RunFailure {
            error,
            partial: Box::new(report),
        }),
    }
}

fn doubling(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &TopKConfig,
    report: &mut RunReport,
) -> Result<BTreeSet<Label>, RankError> {
    let n = labels.len() as u64;
    let l = env.l() as u64;
    let mut q = config.multiwise.q;
    for iteration in 1u64.. {
        if q > config.multiwise.q_cap {
            return Err(RankError::PhaseCap {
                used: env.queries(),
                cap: config.multiwise.q_cap,
            });
        }
        report.final_q = Some(q);
        let mw = config.multiwise.clone().with_q(q);
        let out = run_multiwise(env, labels, k, &mw, None, iteration, &mut report.trace)?;
        let cap = env.queries() + (q * n).div_ceil(l);
        match run_pairwise(
            env,
            &out.remaining,
            out.k_remaining,
            &config.pairwise,
            Some(cap),
            iteration,
            &mut report.trace,
        ) {
            Ok(rest) => {
                let mut all = out.selected;
                all.extend(rest);
                return Ok(all);
            }
            Err(RankError::PhaseCap { .. }) => q = q.saturating_mul(2),
            Err(e) => return Err(e),
        }
    }
    unreachable!("the doubling loop only exits by returning")
}
