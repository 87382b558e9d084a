//! Top-k identification from pairwise comparisons.
//!
//! Each recursion level samples a random pair graph over the surviving
//! labels, queries every pair once per round, labels edges from pooled win
//! ratios and declares an item bottom (top) once enough items reach it (are
//! reached from it) by a short label-monotone path containing a strict edge.
//! A level ends when a quarter of its items are decided; the undecided rest
//! is solved recursively with `k` reduced by the number of confident-top
//! items.

mod graph;
mod label;

use std::collections::BTreeSet;

pub use graph::{classify_relation, ComparisonGraph, Edge, PartitionResult};
pub use label::{label_edge, EdgeLabel, LabelRule};

use crate::driver::{Phase, TraceRow};
use crate::env::Environment;
use crate::error::{ModelError, RankError};
use crate::model::Label;
use crate::rng::tag;

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// `max(8, ceil(c * ln(n)^2))`.
pub fn default_kappa(n: usize, c: f64) -> usize {
    let ln = (n.max(2) as f64).ln();
    ((c * ln * ln).ceil() as usize).max(8)
}

/// Levels needed when every level removes at least a quarter of its items,
/// plus slack.
pub fn default_depth_cap(n: usize) -> usize {
    ((n.max(2) as f64).ln() / (4.0f64 / 3.0).ln()).ceil() as usize + 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseConfig {
    /// Pairs sampled per item and maximum path length.
    pub kappa: usize,
    /// Classification starts once `rounds >= q_min_factor * kappa^3`.
    pub q_min_factor: f64,
    pub max_total_queries: u64,
    pub recursion_depth_cap: usize,
    pub label_rule: LabelRule,
}

impl PairwiseConfig {
    pub fn for_n(n: usize) -> Self {
        Self {
            kappa: default_kappa(n, 1.0),
            q_min_factor: 1.0,
            max_total_queries: DEFAULT_BUDGET,
            recursion_depth_cap: default_depth_cap(n),
            label_rule: LabelRule::REFERENCE,
        }
    }

    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.max_total_queries = budget;
        self
    }

    pub fn with_rule(mut self, rule: LabelRule) -> Self {
        self.label_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, reason: &str| {
            Err(ModelError::InvalidField {
                field,
                reason: reason.to_string(),
            })
        };
        if self.kappa < 2 {
            return bad("kappa", "must be at least 2");
        }
        if !(self.q_min_factor >= 1.0) {
            return bad("q_min_factor", "must be at least 1");
        }
        if self.max_total_queries == 0 || self.recursion_depth_cap == 0 {
            return bad("max_total_queries", "caps must be positive");
        }
        if !(self.label_rule.approx > 0.0 && self.label_rule.strict > 0.0) {
            return bad("label_rule", "coefficients must be positive");
        }
        Ok(())
    }

    /// Rounds before edge labels are trusted.
    pub fn trust_gate(&self) -> u64 {
        (self.q_min_factor * (self.kappa as f64).powi(3)).ceil() as u64
    }
}

#[derive(Debug, Clone, Default)]
pub struct PairwiseOutcome {
    pub selected: BTreeSet<Label>,
    pub trace: Vec<TraceRow>,
}

/// Returns the `k` labels judged best among `labels`.
pub fn alg_pairwise(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &PairwiseConfig,
) -> Result<PairwiseOutcome, RankError> {
    let mut outcome = PairwiseOutcome::default();
    outcome.selected = run_pairwise(env, labels, k, config, None, 0, &mut outcome.trace)?;
    Ok(outcome)
}

/// Pairwise elimination with an optional absolute ledger cap. `stream` keeps
/// random streams of separate invocations within one run apart.
pub(crate) fn run_pairwise(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &PairwiseConfig,
    cap: Option<u64>,
    stream: u64,
    trace: &mut Vec<TraceRow>,
) -> Result<BTreeSet<Label>, RankError> {
    config.validate()?;
    if k > labels.len() {
        return Err(ModelError::InvalidField {
            field: "k",
            reason: format!("{k} exceeds the {} candidate labels", labels.len()),
        }
        .into());
    }
    let gate = config.trust_gate();
    let kappa = config.kappa;
    let mut omega = labels.to_vec();
    let mut k = k;
    let mut selected = BTreeSet::new();

    for depth in 0.. {
        if k == 0 {
            return Ok(selected);
        }
        if omega.len() == k {
            selected.extend(omega);
            return Ok(selected);
        }
        if depth >= config.recursion_depth_cap {
            return Err(RankError::Internal(format!(
                "pairwise recursion exceeded depth cap {}",
                config.recursion_depth_cap
            )));
        }
        let m = omega.len();
        let level = [stream, depth as u64];
        let mut graph = ComparisonGraph::sample(
            omega.clone(),
            kappa,
            &mut env.stream(&[tag::PAIR_GRAPH, level[0], level[1]]),
        );
        let mut units = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                env.unit(
                    vec![omega[e.a], omega[e.b]],
                    e.multiplicity,
                    &[tag::PAIR_EDGE, level[0], level[1], i as u64],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;

        let round_cost = graph.round_cost();
        let start = env.queries();
        let mut partition: Option<PartitionResult> = None;
        let partition = loop {
            let ran = env
                .ensure_within(round_cost, config.max_total_queries)
                .and_then(|_| env.run_units(&mut units, cap));
            if let Err(err) = ran {
                return Err(match err {
                    RankError::BudgetExhausted { used, limit, .. } => RankError::BudgetExhausted {
                        used,
                        limit,
                        partial: partition,
                    },
                    other => other,
                });
            }
            graph.absorb_round(units.iter().map(|u| (u.wins()[0], u.wins()[1])));
            if graph.rounds() < gate {
                continue;
            }
            if graph.relabel(&config.label_rule, kappa)? || partition.is_none() {
                partition = Some(graph.classify(k, kappa));
            }
            if let Some(p) = &partition {
                if 4 * p.decided() >= m {
                    break partition.take().expect("checked above");
                }
            }
        };

        trace.push(TraceRow {
            phase: Phase::Pairwise,
            stream,
            depth,
            m,
            k,
            rounds: graph.rounds(),
            queries: env.queries() - start,
            omega_g: partition.omega_g.iter().copied().collect(),
            omega_b: partition.omega_b.iter().copied().collect(),
        });

        let top = partition.omega_g.len();
        if top > k {
            return Err(RankError::Inconsistent(format!(
                "{top} items declared top with k = {k}"
            )));
        }
        let next_k = k - top;
        if partition.remaining.len() < next_k {
            return Err(RankError::Inconsistent(format!(
                "{} undecided items left for k = {next_k}",
                partition.remaining.len()
            )));
        }
        selected.extend(partition.omega_g.iter().copied());
        omega.retain(|l| partition.remaining.contains(l));
        k = next_k;
    }
    unreachable!("the level loop only exits by returning")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_labeled, Instance};

    #[test]
    fn default_kappa_has_floor() {
        assert_eq!(default_kappa(4, 1.0), 8);
        assert_eq!(default_kappa(256, 1.0), 31);
    }

    #[test]
    fn solved_input_costs_nothing() {
        let li = make_labeled(Instance::new(vec![3.0, 2.0, 1.0], 2, 2).unwrap(), 1);
        let mut env = Environment::new(&li, 100);
        let labels = vec![Label(0), Label(2)];
        let out = alg_pairwise(&mut env, &labels, 2, &PairwiseConfig::for_n(3)).unwrap();
        assert_eq!(out.selected, labels.iter().copied().collect());
        assert_eq!(env.queries(), 0);
        let out = alg_pairwise(&mut env, &labels, 0, &PairwiseConfig::for_n(3)).unwrap();
        assert!(out.selected.is_empty());
    }

    #[test]
    fn tie_with_small_budget_exhausts() {
        let li = make_labeled(Instance::new(vec![1.0, 1.0, 1.0, 1.0], 2, 2).unwrap(), 3);
        let config = PairwiseConfig::for_n(4).with_budget(200_000);
        let mut env = Environment::new(&li, config.max_total_queries);
        let err = alg_pairwise(&mut env, &li.labels(), 2, &config).unwrap_err();
        assert!(err.is_budget(), "{err}");
        assert!(env.queries() <= 200_000);
    }

    #[test]
    fn easy_pair_is_resolved() {
        let li = make_labeled(Instance::new(vec![4.0, 1.0], 1, 2).unwrap(), 8);
        let config = PairwiseConfig::for_n(2).with_rule(LabelRule::DESK);
        let mut env = Environment::new(&li, config.max_total_queries);
        let out = alg_pairwise(&mut env, &li.labels(), 1, &config).unwrap();
        assert_eq!(out.selected, li.truth());
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut c = PairwiseConfig::for_n(10);
        assert!(c.validate().is_ok());
        c.kappa = 1;
        assert!(c.validate().is_err());
        let mut c = PairwiseConfig::for_n(10);
        c.q_min_factor = 0.5;
        assert!(c.validate().is_err());
    }
}
