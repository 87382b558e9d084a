//! Ground-truth instances, the hidden label permutation, and the MNL choice
//! probability.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::rng::{self, tag};

/// The identifier an algorithm sees for an item. Labels are unrelated to
/// ranks; only [`LabeledInstance`] knows the mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label(pub u32);

impl Label {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Preference scores sorted in descending order, the target `k` and the
/// maximum comparison-set size `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    theta: Vec<f64>,
    k: usize,
    l: usize,
}

impl Instance {
    pub fn new(theta: Vec<f64>, k: usize, l: usize) -> Result<Self, ModelError> {
        let n = theta.len();
        if n < 2 {
            return Err(invalid("theta", format!("need at least 2 items, got {n}")));
        }
        if let Some(i) = theta.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid(
                "theta",
                format!("entry {i} is {} (scores must be positive and finite)", theta[i]),
            ));
        }
        if let Some(i) = theta.windows(2).position(|w| w[0] < w[1]) {
            return Err(invalid(
                "theta",
                format!(
                    "not sorted descending at index {}: {} < {}",
                    i + 1,
                    theta[i],
                    theta[i + 1]
                ),
            ));
        }
        if k < 1 || k >= n {
            return Err(invalid("k", format!("{k} must satisfy 1 <= k < n = {n}")));
        }
        if l < 2 || l > n {
            return Err(invalid("l", format!("{l} must satisfy 2 <= l <= n = {n}")));
        }
        Ok(Self { theta, k, l })
    }

    /// Builds an instance from utilities `mu`, with `theta = exp(mu)`.
    pub fn from_utilities(mu: &[f64], k: usize, l: usize) -> Result<Self, ModelError> {
        Self::new(mu.iter().map(|m| m.exp()).collect(), k, l)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn with_k(&self, k: usize) -> Result<Self, ModelError> {
        Self::new(self.theta.clone(), k, self.l)
    }

    pub fn with_l(&self, l: usize) -> Result<Self, ModelError> {
        Self::new(self.theta.clone(), self.k, l)
    }

    /// `theta_k == theta_{k+1}`: the top-k set is not identifiable and the
    /// complexity expressions diverge.
    pub fn has_boundary_tie(&self) -> bool {
        self.theta[self.k - 1] == self.theta[self.k]
    }
}

fn invalid(field: &'static str, reason: String) -> ModelError {
    ModelError::InvalidField { field, reason }
}

/// `Pr[winner | subset] = theta_winner / sum_{j in subset} theta_j`, with
/// both arguments given as ranks.
pub fn choice_prob(instance: &Instance, subset: &[usize], winner: usize) -> Result<f64, ModelError> {
    check_subset(subset, instance.n(), instance.n())?;
    if !subset.contains(&winner) {
        return Err(ModelError::WinnerNotInSubset { winner });
    }
    let total: f64 = subset.iter().map(|&r| instance.theta[r]).sum();
    Ok(instance.theta[winner] / total)
}

pub(crate) fn check_subset(subset: &[usize], n: usize, max: usize) -> Result<(), ModelError> {
    if subset.len() < 2 || subset.len() > max {
        return Err(ModelError::SetSize {
            size: subset.len(),
            max,
        });
    }
    for (pos, &x) in subset.iter().enumerate() {
        if x >= n {
            return Err(ModelError::OutOfRange { index: x, n });
        }
        if subset[..pos].contains(&x) {
            return Err(ModelError::Duplicate { index: x });
        }
    }
    Ok(())
}

/// An instance together with the secret permutation from ranks to labels.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    instance: Instance,
    /// `pi[rank]` is the label shown for the item of that rank.
    pi: Vec<Label>,
    rank_of: Vec<usize>,
    seed: u64,
}

impl LabeledInstance {
    /// Uses an explicit permutation. `pi[rank]` must be a bijection onto
    /// `0..n`.
    pub fn with_permutation(instance: Instance, pi: Vec<Label>, seed: u64) -> Result<Self, ModelError> {
        let n = instance.n();
        if pi.len() != n {
            return Err(invalid("pi", format!("length {} != n = {n}", pi.len())));
        }
        let mut rank_of = vec![usize::MAX; n];
        for (rank, label) in pi.iter().enumerate() {
            let idx = label.index();
            if idx >= n || rank_of[idx] != usize::MAX {
                return Err(invalid("pi", format!("not a permutation at rank {rank}")));
            }
            rank_of[idx] = rank;
        }
        Ok(Self {
            instance,
            pi,
            rank_of,
            seed,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    pub fn label_of(&self, rank: usize) -> Label {
        self.pi[rank]
    }

    pub fn rank_of(&self, label: Label) -> usize {
        self.rank_of[label.index()]
    }

    pub fn permutation(&self) -> &[Label] {
        &self.pi
    }

    /// All labels in label order.
    pub fn labels(&self) -> Vec<Label> {
        (0..self.n() as u32).map(Label).collect()
    }

    /// Labels of the true top-k items.
    pub fn truth(&self) -> BTreeSet<Label> {
        self.pi[..self.instance.k()].iter().copied().collect()
    }

    pub fn is_top(&self, label: Label) -> bool {
        self.rank_of(label) < self.instance.k()
    }
}

/// Draws a uniform permutation (Fisher-Yates) from the seed's permutation
/// sub-stream.
pub fn make_labeled(instance: Instance, seed: u64) -> LabeledInstance {
    let mut pi: Vec<Label> = (0..instance.n() as u32).map(Label).collect();
    pi.shuffle(&mut rng::stream(seed, &[tag::PERMUTATION]));
    LabeledInstance::with_permutation(instance, pi, seed).expect("shuffle yields a permutation")
}

/// On-disk instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub theta: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance, seed: u64) -> Self {
        Self {
            n: instance.n(),
            k: instance.k(),
            l: instance.l(),
            theta: instance.theta().to_vec(),
            seed,
        }
    }

    /// Validates the record. Unsorted scores are rejected, never re-sorted.
    pub fn into_instance(self) -> Result<(Instance, u64), ModelError> {
        if self.n != self.theta.len() {
            return Err(invalid(
                "n",
                format!("{} does not match theta length {}", self.n, self.theta.len()),
            ));
        }
        Ok((Instance::new(self.theta, self.k, self.l)?, self.seed))
    }

    pub fn parse(text: &str) -> Result<(Instance, u64), ModelError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(format!("invalid instance JSON: {e}")))?;
        file.into_instance()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

pub fn read_instance(path: &Path) -> Result<(Instance, u64), ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))?;
    InstanceFile::parse(&text).map_err(|e| match e {
        ModelError::Parse(msg) => ModelError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    fn inst(theta: &[f64], k: usize) -> Instance {
        Instance::new(theta.to_vec(), k, 2).unwrap()
    }

    #[test]
    fn choice_prob_examples() {
        let eq = Instance::new(vec![1.0, 1.0, 1.0], 1, 3).unwrap();
        assert_relative_eq!(choice_prob(&eq, &[0, 1, 2], 1).unwrap(), 1.0 / 3.0);
        let two = inst(&[2.0, 1.0], 1);
        assert_relative_eq!(choice_prob(&two, &[0, 1], 0).unwrap(), 2.0 / 3.0);
        let three = Instance::new(vec![3.0, 2.0, 1.0], 1, 3).unwrap();
        assert_relative_eq!(choice_prob(&three, &[0, 2], 2).unwrap(), 0.25);
    }

    #[test]
    fn choice_prob_errors() {
        let three = Instance::new(vec![3.0, 2.0, 1.0], 1, 3).unwrap();
        assert!(matches!(
            choice_prob(&three, &[0, 2], 1),
            Err(ModelError::WinnerNotInSubset { .. })
        ));
        assert!(matches!(choice_prob(&three, &[0], 0), Err(ModelError::SetSize { .. })));
        assert!(matches!(choice_prob(&three, &[0, 0], 0), Err(ModelError::Duplicate { .. })));
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new(vec![1.0, 2.0], 1, 2).is_err());
        assert!(Instance::new(vec![1.0, 0.0], 1, 2).is_err());
        assert!(Instance::new(vec![1.0, f64::NAN], 1, 2).is_err());
        assert!(Instance::new(vec![2.0, 1.0], 2, 2).is_err());
        assert!(Instance::new(vec![2.0, 1.0], 1, 3).is_err());
        assert!(Instance::new(vec![1.0], 1, 2).is_err());
        let tie = Instance::new(vec![1.0, 1.0], 1, 2).unwrap();
        assert!(tie.has_boundary_tie());
        let u = Instance::from_utilities(&[1.0f64.ln(), 0.5f64.ln()], 1, 2).unwrap();
        assert_relative_eq!(u.theta()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn make_labeled_is_deterministic() {
        let i = Instance::new(vec![5.0, 4.0, 3.0, 2.0, 1.0], 2, 2).unwrap();
        let a = make_labeled(i.clone(), 42);
        let b = make_labeled(i, 42);
        assert_eq!(a.permutation(), b.permutation());
        for r in 0..5 {
            assert_eq!(a.rank_of(a.label_of(r)), r);
        }
    }

    #[test]
    fn make_labeled_is_uniform_over_permutations() {
        let i = Instance::new(vec![3.0, 2.0, 1.0], 1, 2).unwrap();
        let mut counts: HashMap<Vec<Label>, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            *counts.entry(make_labeled(i.clone(), seed).permutation().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let f = *c as f64 / trials as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn instance_file_rejects_unsorted_theta() {
        let text = r#"{"n": 3, "k": 1, "l": 2, "theta": [1.0, 3.0, 2.0], "seed": 1}"#;
        let err = InstanceFile::parse(text).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
        assert!(err.to_string().contains("not sorted"), "{err}");
    }

    #[test]
    fn instance_file_reports_position() {
        let err = InstanceFile::parse("{\"n\": 3,\n \"k\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = InstanceFile::parse(r#"{"n": 4, "k": 1, "l": 2, "theta": [3.0, 2.0, 1.0]}"#).unwrap_err();
        assert!(err.to_string().contains("`n`"), "{err}");
    }

    #[test]
    fn instance_file_round_trip() {
        let i = Instance::new(vec![4.0, 2.0, 1.0], 1, 3).unwrap();
        let json = InstanceFile::from_instance(&i, 9).to_json();
        let (back, seed) = InstanceFile::parse(&json).unwrap();
        assert_eq!(back, i);
        assert_eq!(seed, 9);
    }
}
