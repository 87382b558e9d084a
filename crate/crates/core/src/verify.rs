//! Independent oracles: exact choice distributions, exhaustive dominance
//! enumeration, concentration and goodness-of-fit checks, and seeded success
//! estimates.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::driver::{top_k, RunReport, TopKConfig};
use crate::env::Environment;
use crate::error::{ModelError, RankError};
use crate::exec::{self, Exec};
use crate::model::{check_subset, make_labeled, Instance};
use crate::pairwise::{EdgeLabel, LabelRule};
use crate::rng::tag;

/// Significance levels and tolerances shared by statistical tests.
pub mod levels {
    /// Goodness-of-fit rejection level.
    pub const CHI_SQUARE: f64 = 1e-3;
    /// Normal quantile for 95% Wilson intervals.
    pub const WILSON_Z: f64 = 1.959_963_984_540_054;
    /// Concentration constant for binomial checks.
    pub const BINOMIAL_C: f64 = 4.0;
}

/// Largest vertex count [`brute_force_dominance`] accepts.
pub const BRUTE_FORCE_MAX_VERTICES: usize = 7;

/// `Pr[a | S]` for every member of `subset` (ranks), in subset order.
pub fn exact_choice_distribution(instance: &Instance, subset: &[usize]) -> Result<Vec<f64>, ModelError> {
    check_subset(subset, instance.n(), instance.n())?;
    let theta = instance.theta();
    let total: f64 = subset.iter().map(|&r| theta[r]).sum();
    Ok(subset.iter().map(|&r| theta[r] / total).collect())
}

/// The dominance relation by listing every walk of at most `kappa` edges
/// from every vertex. Edges are `(i, j, label of (i, j))`.
pub fn brute_force_dominance(
    m: usize,
    edges: &[(usize, usize, EdgeLabel)],
    kappa: usize,
) -> Result<Vec<Vec<bool>>, ModelError> {
    if m > BRUTE_FORCE_MAX_VERTICES {
        return Err(ModelError::InvalidField {
            field: "vertices",
            reason: format!("{m} exceeds the enumeration limit {BRUTE_FORCE_MAX_VERTICES}"),
        });
    }
    // Every step a walk may take, read in the walking direction.
    let mut steps: Vec<(usize, usize, EdgeLabel)> = Vec::new();
    for &(i, j, label) in edges {
        if i >= m || j >= m {
            return Err(ModelError::OutOfRange { index: i.max(j), n: m });
        }
        steps.push((i, j, label));
        steps.push((j, i, label.mirror()));
    }
    steps.retain(|s| s.2.traversable());

    // A shortest witness visits each (vertex, strict used) state once.
    let depth = kappa.min(2 * m);
    let mut dom = vec![vec![false; m]; m];
    for (source, row) in dom.iter_mut().enumerate() {
        let mut stack = vec![(source, false, 0usize)];
        while let Some((v, strict, len)) = stack.pop() {
            if strict && v != source {
                row[v] = true;
            }
            if len == depth {
                continue;
            }
            for &(a, b, label) in &steps {
                if a == v {
                    stack.push((b, strict || label.is_strict(), len + 1));
                }
            }
        }
    }
    Ok(dom)
}

/// Adjacency lists of an Erdős–Rényi graph `G(m, p)`.
pub fn gnp_adjacency<R: Rng>(m: usize, p: f64, rng: &mut R) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m];
    for a in 0..m {
        for b in a + 1..m {
            if rng.random_bool(p) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

/// Whether a path `i -> ... -> j` of at most `hops` edges exists whose
/// vertex indices never decrease.
pub fn monotone_path_within(adj: &[Vec<usize>], i: usize, j: usize, hops: usize) -> bool {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([i]);
    dist[i] = 0;
    while let Some(v) = queue.pop_front() {
        if v == j {
            return true;
        }
        if dist[v] == hops {
            continue;
        }
        for &w in &adj[v] {
            if w > v && w <= j && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    false
}

/// Queries the pair `(θ_i, θ_j)` `q` times through the oracle and labels
/// the edge from `i`'s side.
pub fn simulate_label(theta_i: f64, theta_j: f64, q: u64, kappa: usize, rule: &LabelRule, seed: u64) -> Result<EdgeLabel, RankError> {
    let (hi, lo) = if theta_i >= theta_j { (theta_i, theta_j) } else { (theta_j, theta_i) };
    let instance = Instance::new(vec![hi, lo], 1, 2)?;
    let labeled = make_labeled(instance, seed);
    let (li, lj) = if theta_i >= theta_j {
        (labeled.label_of(0), labeled.label_of(1))
    } else {
        (labeled.label_of(1), labeled.label_of(0))
    };
    let mut env = Environment::new(&labeled, q);
    let mut unit = [env.unit(vec![li, lj], q, &[tag::VERIFY])?];
    env.run_units(&mut unit, None)?;
    let wins = unit[0].wins();
    Ok(rule.label(wins[0], wins[1], q, kappa)?)
}

/// Fraction of `samples` of `B(m, p)` inside
/// `mp ± c * sqrt(mp * ln n)`.
pub fn binomial_pass_rate(samples: &[u64], m: u64, p: f64, c: f64, n: f64) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mean = m as f64 * p;
    let half = c * (mean * n.ln()).sqrt();
    let inside = samples
        .iter()
        .filter(|&&x| (x as f64 - mean).abs() <= half)
        .count();
    inside as f64 / samples.len() as f64
}

/// Whether `samples` of `B(m, p)` fall inside the concentration window at a
/// rate of at least `1 - 1/n`.
pub fn binomial_bounds_check(samples: &[u64], m: u64, p: f64, n: f64) -> bool {
    binomial_pass_rate(samples, m, p, levels::BINOMIAL_C, n) >= 1.0 - 1.0 / n
}

pub fn sample_binomial<R: Rng>(m: u64, p: f64, trials: usize, rng: &mut R) -> Result<Vec<u64>, ModelError> {
    let dist = Binomial::new(m, p).map_err(|e| ModelError::InvalidField {
        field: "p",
        reason: e.to_string(),
    })?;
    Ok((0..trials).map(|_| dist.sample(rng)).collect())
}

/// Pearson statistic and upper-tail p-value of `observed` against
/// `expected` probabilities. Cells with zero probability must be empty.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            return (f64::INFINITY, 0.0);
        }
    }
    if cells < 2 {
        return (0.0, 1.0);
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    (stat, dist.sf(stat))
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Failed runs by error kind (`budget`, `inconsistent`, ...).
    pub errors: BTreeMap<String, u64>,
}

impl TrialSummary {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let trials = outcomes.len() as u64;
        let successes = outcomes.iter().filter(|o| o.success).count() as u64;
        let (lo, hi) = wilson(successes, trials, levels::WILSON_Z);
        let mut errors = BTreeMap::new();
        for o in outcomes {
            if let Some(kind) = &o.error {
                *errors.entry(kind.clone()).or_insert(0) += 1;
            }
        }
        Self {
            trials,
            successes,
            estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            wilson_low: lo,
            wilson_high: hi,
            errors,
        }
    }
}

/// One seeded run judged against the hidden permutation.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    /// Every trace level kept top items and dropped only bottom items.
    pub trace_sound: bool,
    pub queries_used: u64,
    /// Error kind of a failed run.
    pub error: Option<String>,
    pub report: RunReport,
}

pub fn error_kind(err: &RankError) -> &'static str {
    match err {
        RankError::Model(_) => "model",
        RankError::BudgetExhausted { .. } => "budget",
        RankError::PhaseCap { .. } => "phase_cap",
        RankError::Inconsistent(_) => "inconsistent",
        RankError::Internal(_) => "internal",
    }
}

/// Runs `top_k` once for `seed`: the seed fixes the hidden permutation and
/// every query stream.
pub fn run_trial(instance: &Instance, config: &TopKConfig, seed: u64) -> TrialOutcome {
    let labeled = make_labeled(instance.clone(), seed);
    let mut env = Environment::new(&labeled, config.budget);
    let labels = labeled.labels();
    match top_k(&mut env, &labels, instance.k(), config) {
        Ok(report) => TrialOutcome {
            seed,
            success: report.success(&labeled),
            trace_sound: report.trace_sound(&labeled),
            queries_used: report.queries_used,
            error: None,
            report,
        },
        Err(failure) => TrialOutcome {
            seed,
            success: false,
            trace_sound: failure.partial.trace_sound(&labeled),
            queries_used: failure.partial.queries_used,
            error: Some(error_kind(&failure.error).to_string()),
            report: *failure.partial,
        },
    }
}

/// One outcome per seed, in seed order.
pub fn run_trials(instance: &Instance, config: &TopKConfig, seeds: &[u64], exec: Exec) -> Vec<TrialOutcome> {
    exec::map(exec, seeds, |&seed| run_trial(instance, config, seed))
}

pub fn estimate_success(instance: &Instance, config: &TopKConfig, seeds: &[u64], exec: Exec) -> TrialSummary {
    TrialSummary::from_outcomes(&run_trials(instance, config, seeds, exec))
}
