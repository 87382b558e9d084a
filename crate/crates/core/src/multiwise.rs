//! Top-k selection from size-`l` comparisons.
//!
//! [`basic_query`] samples `ceil(m * kappa / l)` random subsets and queries
//! each `Q` times. An item passes the indicator on a subset when it won at
//! least `alpha` times and at least `gamma * |S|` other members won at most
//! a `1 / beta` fraction of its wins. [`alg_multiwise`] uses the pass rates
//! to confidently select top items or discard bottom items, and stops once
//! neither is safe. The doubling driver in [`crate::driver`] then hands the
//! remainder to the pairwise algorithm.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use crate::driver::{Phase, TraceRow};
use crate::env::Environment;
use crate::error::{ModelError, RankError};
use crate::model::Label;
use crate::pairwise::{default_kappa, DEFAULT_BUDGET};
use crate::rng::tag;

const TAU_SELECT: f64 = 7.0 / 8.0;
const TAU_COVER: f64 = 13.0 / 16.0;
const TAU_KEEP: f64 = 3.0 / 4.0;
/// Membership slack between an item and any item it outscores.
const ORDER_SLACK: f64 = 33.0 / 32.0;

// Each selection threshold leaves room for the order slack of the next one down.
const _: () = assert!(TAU_SELECT >= ORDER_SLACK * TAU_COVER);
const _: () = assert!(TAU_COVER >= ORDER_SLACK * ORDER_SLACK * TAU_KEEP);

pub const DEFAULT_Q_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiwiseConfig {
    pub kappa: usize,
    /// Minimum win count for the indicator; at least `kappa`.
    pub alpha: f64,
    /// Queries per subset per sweep.
    pub q: u64,
    /// Multi-wise comparisons are used when `l >= factor * ceil(log2 n)`.
    pub l_threshold_factor: f64,
    pub max_total_queries: u64,
    /// Largest `Q` the doubling driver will try.
    pub q_cap: u64,
    pub recursion_depth_cap: usize,
}

impl MultiwiseConfig {
    pub fn for_n(n: usize) -> Self {
        let kappa = default_kappa(n, 1.0);
        Self {
            kappa,
            alpha: kappa as f64,
            q: 1,
            l_threshold_factor: 1.0,
            max_total_queries: DEFAULT_BUDGET,
            q_cap: DEFAULT_Q_CAP,
            recursion_depth_cap: n.max(2),
        }
    }

    /// Sets `kappa` and raises `alpha` to it if needed.
    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.kappa = kappa;
        self.alpha = self.alpha.max(kappa as f64);
        self
    }

    pub fn with_q(mut self, q: u64) -> Self {
        self.q = q;
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
        if !(self.alpha >= self.kappa as f64) || !self.alpha.is_finite() {
            return bad("alpha", "must be finite and at least kappa");
        }
        if self.q == 0 || self.q_cap == 0 {
            return bad("q", "must be at least 1");
        }
        if !(self.l_threshold_factor > 0.0) {
            return bad("l_threshold_factor", "must be positive");
        }
        if self.max_total_queries == 0 || self.recursion_depth_cap == 0 {
            return bad("max_total_queries", "caps must be positive");
        }
        Ok(())
    }

    /// Whether subsets of size `l` are large enough for `n` items. Pairs
    /// always go to the pairwise algorithm.
    pub fn uses_multiwise(&self, n: usize, l: usize) -> bool {
        let log = (n.max(2) as f64).log2().ceil();
        l > 2 && l as f64 >= self.l_threshold_factor * log
    }
}

/// Thresholds of one indicator family and its membership fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl IndicatorParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, tau: f64) -> Result<Self, ModelError> {
        let bad = |field, reason: &str| {
            Err(ModelError::InvalidField {
                field,
                reason: reason.to_string(),
            })
        };
        if !(alpha > 0.0 && alpha.is_finite()) {
            return bad("alpha", "must be positive and finite");
        }
        if !(beta > 0.0 && beta <= 32.0) {
            return bad("beta", "must lie in (0, 32]");
        }
        if !((1.0 / 32.0..=0.5).contains(&gamma)) {
            return bad("gamma", "must lie in [1/32, 1/2]");
        }
        if !((TAU_KEEP..=TAU_SELECT).contains(&tau)) {
            return bad("tau", "must lie in [3/4, 7/8]");
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            tau,
        })
    }

    fn fixed(alpha: f64, beta: f64, gamma: f64, tau: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            tau,
        }
    }
}

/// Indicator for member `i` of one subset, given the subset's empirical win
/// frequencies `row` after `q` queries.
pub fn indicator(row: &[f64], i: usize, params: &IndicatorParams, q: u64) -> bool {
    let ti = row[i];
    if ti < params.alpha / q as f64 {
        return false;
    }
    let cut = ti / params.beta;
    let below = row
        .iter()
        .enumerate()
        .filter(|&(j, &t)| j != i && t <= cut)
        .count();
    below as f64 >= params.gamma * row.len() as f64
}

/// Sampled subsets (as positions into `labels`) with their win counts.
#[derive(Debug, Clone)]
pub struct HyperedgeSample {
    labels: Vec<Label>,
    subsets: Vec<Vec<usize>>,
    wins: Vec<Vec<u64>>,
    q: u64,
    degree: Vec<usize>,
}

impl HyperedgeSample {
    /// Builds a sample from known counts; `wins[u][t]` belongs to
    /// `subsets[u][t]`.
    pub fn from_counts(
        labels: Vec<Label>,
        subsets: Vec<Vec<usize>>,
        wins: Vec<Vec<u64>>,
        q: u64,
    ) -> Result<Self, ModelError> {
        let m = labels.len();
        let mut degree = vec![0; m];
        if subsets.len() != wins.len() || q == 0 {
            return Err(ModelError::InvalidField {
                field: "wins",
                reason: "one count row per subset and q >= 1 required".into(),
            });
        }
        for (set, w) in subsets.iter().zip(&wins) {
            if set.len() != w.len() || w.iter().sum::<u64>() != q {
                return Err(ModelError::InvalidField {
                    field: "wins",
                    reason: "each row must have one count per member summing to q".into(),
                });
            }
            for &p in set {
                if p >= m {
                    return Err(ModelError::OutOfRange { index: p, n: m });
                }
                degree[p] += 1;
            }
        }
        Ok(Self {
            labels,
            subsets,
            wins,
            q,
            degree,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn wins(&self) -> &[Vec<u64>] {
        &self.wins
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn degree(&self) -> &[usize] {
        &self.degree
    }

    /// Empirical win frequencies of subset `u`, aligned with `subsets()[u]`.
    pub fn theta_tilde(&self, u: usize) -> Vec<f64> {
        let q = self.q as f64;
        self.wins[u].iter().map(|&w| w as f64 / q).collect()
    }

    /// Evaluates the indicator for every (member, subset) pair. `tau` of
    /// `params` is not used here.
    pub fn stats(&self, params: &IndicatorParams) -> IndicatorStats {
        let mut passes = vec![0u64; self.labels.len()];
        let x = (0..self.subsets.len())
            .map(|u| {
                let row = self.theta_tilde(u);
                self.subsets[u]
                    .iter()
                    .enumerate()
                    .map(|(t, &p)| {
                        let hit = indicator(&row, t, params, self.q);
                        passes[p] += hit as u64;
                        hit
                    })
                    .collect()
            })
            .collect();
        IndicatorStats {
            x,
            passes,
            degree: self.degree.clone(),
        }
    }
}

/// Indicator outcomes `x[u][t]` for member `t` of subset `u`, and per-item
/// pass counts.
#[derive(Debug, Clone)]
pub struct IndicatorStats {
    pub x: Vec<Vec<bool>>,
    pub passes: Vec<u64>,
    pub degree: Vec<usize>,
}

impl IndicatorStats {
    /// Membership mask of the set of items passing on at least a `tau`
    /// fraction of their subsets.
    pub fn members(&self, tau: f64) -> Vec<bool> {
        self.passes
            .iter()
            .zip(&self.degree)
            .map(|(&p, &d)| d > 0 && p as f64 >= tau * d as f64)
            .collect()
    }
}

/// The set of labels in `sample` passing on at least a `tau` fraction of
/// their subsets.
pub fn omega_set(sample: &HyperedgeSample, params: &IndicatorParams) -> BTreeSet<Label> {
    sample
        .stats(params)
        .members(params.tau)
        .into_iter()
        .zip(sample.labels())
        .filter_map(|(hit, &l)| hit.then_some(l))
        .collect()
}

/// `ceil(m * kappa / size)` subsets of `size` distinct positions, plus one
/// extra subset for each position no subset covered.
pub fn sample_subsets<R: Rng>(m: usize, size: usize, kappa: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let size = size.min(m);
    if size < 2 {
        return Vec::new();
    }
    let s = (m * kappa).div_ceil(size);
    let mut covered = vec![false; m];
    let mut subsets: Vec<Vec<usize>> = (0..s)
        .map(|_| {
            let mut set = index::sample(rng, m, size).into_vec();
            set.sort_unstable();
            for &p in &set {
                covered[p] = true;
            }
            set
        })
        .collect();
    let uncovered: Vec<usize> = (0..m).filter(|&p| !covered[p]).collect();
    for p in uncovered {
        let mut set: Vec<usize> = index::sample(rng, m - 1, size - 1)
            .into_iter()
            .map(|x| if x >= p { x + 1 } else { x })
            .collect();
        set.push(p);
        set.sort_unstable();
        subsets.push(set);
    }
    subsets
}

/// One sweep: samples subsets of size `min(l, |labels|)` and queries each
/// `q` times.
pub fn basic_query(
    env: &mut Environment<'_>,
    labels: &[Label],
    l: usize,
    kappa: usize,
    q: u64,
) -> Result<HyperedgeSample, RankError> {
    let limit = env.budget();
    sweep(env, labels, l, kappa, q, limit, None, [0, 0])
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    env: &mut Environment<'_>,
    labels: &[Label],
    l: usize,
    kappa: usize,
    q: u64,
    limit: u64,
    cap: Option<u64>,
    level: [u64; 2],
) -> Result<HyperedgeSample, RankError> {
    if q == 0 {
        return Err(ModelError::InvalidField {
            field: "q",
            reason: "must be at least 1".into(),
        }
        .into());
    }
    let mut rng = env.stream(&[tag::HYPER_SAMPLE, level[0], level[1]]);
    let subsets = sample_subsets(labels.len(), l, kappa, &mut rng);
    let mut units = subsets
        .iter()
        .enumerate()
        .map(|(u, set)| {
            env.unit(
                set.iter().map(|&p| labels[p]).collect(),
                q,
                &[tag::HYPER_EDGE, level[0], level[1], u as u64],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    env.ensure_within(units.len() as u64 * q, limit)?;
    env.run_units(&mut units, cap)?;
    let wins = units.iter().map(|u| u.wins().to_vec()).collect();
    Ok(HyperedgeSample::from_counts(labels.to_vec(), subsets, wins, q)?)
}

#[derive(Debug, Clone, Default)]
pub struct MultiwiseOutcome {
    /// Labels confidently selected as top items.
    pub selected: BTreeSet<Label>,
    /// Labels still undecided, in input order.
    pub remaining: Vec<Label>,
    /// Top items still to be found among `remaining`.
    pub k_remaining: usize,
    pub trace: Vec<TraceRow>,
}

/// One run of the multi-wise elimination with the configured `Q`.
pub fn alg_multiwise(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &MultiwiseConfig,
) -> Result<MultiwiseOutcome, RankError> {
    let mut trace = Vec::new();
    let mut out = run_multiwise(env, labels, k, config, None, 0, &mut trace)?;
    out.trace = trace;
    Ok(out)
}

pub(crate) fn run_multiwise(
    env: &mut Environment<'_>,
    labels: &[Label],
    k: usize,
    config: &MultiwiseConfig,
    cap: Option<u64>,
    stream: u64,
    trace: &mut Vec<TraceRow>,
) -> Result<MultiwiseOutcome, RankError> {
    config.validate()?;
    if k > labels.len() {
        return Err(ModelError::InvalidField {
            field: "k",
            reason: format!("{k} exceeds the {} candidate labels", labels.len()),
        }
        .into());
    }
    let alpha = config.alpha;
    let guard = IndicatorParams::fixed(alpha, 32.0, 1.0 / 4.0, TAU_COVER);
    let fine = IndicatorParams::fixed(alpha, 4.0, 1.0 / 16.0, TAU_COVER);
    let mut omega = labels.to_vec();
    let mut k = k;
    let mut selected = BTreeSet::new();

    for depth in 0.. {
        let m = omega.len();
        if k == 0 || m <= 2 || 2 * k > m {
            break;
        }
        if depth >= config.recursion_depth_cap {
            return Err(RankError::Internal(format!(
                "multi-wise recursion exceeded depth cap {}",
                config.recursion_depth_cap
            )));
        }
        let start = env.queries();
        let sample = sweep(
            env,
            &omega,
            env.l(),
            config.kappa,
            config.q,
            config.max_total_queries,
            cap,
            [stream, depth as u64],
        )?;
        let guard_hits = sample.stats(&guard).members(guard.tau);
        let fine_stats = sample.stats(&fine);
        let cover = fine_stats.members(TAU_COVER);
        let n_guard = guard_hits.iter().filter(|&&h| h).count();
        let n_cover = cover.iter().filter(|&&h| h).count();

        let mut row = TraceRow {
            phase: Phase::Multiwise,
            stream,
            depth,
            m,
            k,
            rounds: config.q,
            queries: env.queries() - start,
            omega_g: Vec::new(),
            omega_b: Vec::new(),
        };
        let (keep, is_selection) = if n_guard >= 1 && n_cover < k {
            (fine_stats.members(TAU_SELECT), true)
        } else if n_cover >= k {
            (fine_stats.members(TAU_KEEP), false)
        } else {
            trace.push(row);
            break;
        };
        // A selection never reaches k here: it is a subset of `cover`.
        let picked: Vec<Label> = omega
            .iter()
            .zip(&keep)
            .filter_map(|(&l, &hit)| (hit == is_selection).then_some(l))
            .collect();
        if picked.is_empty() {
            trace.push(row);
            break;
        }
        let picked_set: BTreeSet<Label> = picked.iter().copied().collect();
        omega.retain(|l| !picked_set.contains(l));
        if is_selection {
            k -= picked.len();
            selected.extend(picked.iter().copied());
            row.omega_g = picked;
        } else {
            row.omega_b = picked;
        }
        trace.push(row);
    }
    Ok(MultiwiseOutcome {
        selected,
        remaining: omega,
        k_remaining: k,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_labeled, Instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(beta: f64, gamma: f64, tau: f64) -> IndicatorParams {
        IndicatorParams::new(10.0, beta, gamma, tau).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let p = params(4.0, 1.0 / 16.0, 0.75);
        let mut row = vec![0.3; 16];
        row[0] = 0.5;
        row[1] = 0.1;
        assert!(indicator(&row, 0, &p, 100));
        row[0] = 0.0;
        assert!(!indicator(&row, 0, &p, 100));
        let flat = vec![1.0 / 16.0; 16];
        let p = IndicatorParams::new(1.0, 4.0, 1.0 / 16.0, 0.75).unwrap();
        assert!(!indicator(&flat, 3, &p, 100));
    }

    #[test]
    fn param_ranges() {
        assert!(IndicatorParams::new(1.0, 33.0, 0.25, 0.75).is_err());
        assert!(IndicatorParams::new(1.0, 4.0, 0.6, 0.75).is_err());
        assert!(IndicatorParams::new(1.0, 4.0, 0.25, 0.9).is_err());
        assert!(IndicatorParams::new(1.0, 32.0, 1.0 / 32.0, 0.875).is_ok());
    }

    fn one_item_sample(passes: usize, of: usize) -> HyperedgeSample {
        // Item 0 wins every query of the first `passes` subsets and none of
        // the rest.
        let subsets: Vec<Vec<usize>> = (0..of).map(|u| vec![0, u + 1]).collect();
        let wins = (0..of)
            .map(|u| if u < passes { vec![20, 0] } else { vec![0, 20] })
            .collect();
        let labels = (0..=of as u32).map(Label).collect();
        HyperedgeSample::from_counts(labels, subsets, wins, 20).unwrap()
    }

    #[test]
    fn tau_membership_boundaries() {
        let sample = one_item_sample(3, 4);
        assert_eq!(sample.degree()[0], 4);
        let p = IndicatorParams::new(10.0, 4.0, 0.5, 0.75).unwrap();
        assert!(omega_set(&sample, &p).contains(&Label(0)));
        let p = IndicatorParams::new(10.0, 4.0, 0.5, 0.875).unwrap();
        assert!(!omega_set(&sample, &p).contains(&Label(0)));
        let none = one_item_sample(0, 4);
        let p = IndicatorParams::new(30.0, 4.0, 0.5, 0.75).unwrap();
        assert!(omega_set(&none, &p).is_empty());
    }

    #[test]
    fn subset_count_and_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sets = sample_subsets(8, 4, 2, &mut rng);
        assert!(sets.len() >= 4);
        assert!(sets[..4].iter().all(|s| s.len() == 4));
        let mut covered = [false; 8];
        for s in &sets {
            for &p in s {
                covered[p] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn sweep_cost_is_s_times_q() {
        let li = make_labeled(Instance::new(vec![1.0; 8], 2, 4).unwrap(), 2);
        let mut env = Environment::new(&li, 1_000_000);
        let sample = basic_query(&mut env, &li.labels(), 4, 2, 7).unwrap();
        assert_eq!(env.queries(), sample.subsets().len() as u64 * 7);
        for u in 0..sample.subsets().len() {
            let total: f64 = sample.theta_tilde(u).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_k_terminates_without_queries() {
        let li = make_labeled(Instance::new(vec![4.0, 3.0, 2.0, 1.0], 3, 4).unwrap(), 2);
        let mut env = Environment::new(&li, 1_000_000);
        let out = alg_multiwise(&mut env, &li.labels(), 3, &MultiwiseConfig::for_n(4)).unwrap();
        assert_eq!(env.queries(), 0);
        assert!(out.selected.is_empty());
        assert_eq!(out.remaining.len(), 4);
        assert_eq!(out.k_remaining, 3);
    }

    #[test]
    fn nested_thresholds() {
        let li = make_labeled(Instance::new((0..16).map(|i| 0.8f64.powi(i)).collect(), 2, 8).unwrap(), 9);
        let mut env = Environment::new(&li, 1_000_000);
        let sample = basic_query(&mut env, &li.labels(), 8, 4, 64).unwrap();
        let stats = sample.stats(&IndicatorParams::new(4.0, 4.0, 1.0 / 16.0, 0.75).unwrap());
        let loose = stats.members(0.75);
        let strict = stats.members(0.875);
        assert!(strict.iter().zip(&loose).all(|(&s, &l)| !s || l));
    }
}
