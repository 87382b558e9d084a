use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::label::{EdgeLabel, LabelRule};
use crate::error::ModelError;
use crate::model::Label;

/// A deduplicated comparison edge between vertex positions `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Times the pair was drawn when the graph was sampled; the pair is
    /// queried this many times per round.
    pub multiplicity: u64,
    pub wins_a: u64,
    pub wins_b: u64,
    /// Label of `(a, b)` from `a`'s side; `None` before the first round.
    pub label: Option<EdgeLabel>,
}

impl Edge {
    pub fn observations(&self) -> u64 {
        self.wins_a + self.wins_b
    }
}

/// Random pair graph over the current label set, with pooled win counts.
#[derive(Debug, Clone)]
pub struct ComparisonGraph {
    vertices: Vec<Label>,
    edges: Vec<Edge>,
    rounds: u64,
}

impl ComparisonGraph {
    /// Samples `s = m * kappa` uniform pairs of distinct vertices and merges
    /// duplicates. Sampling works on positions in `vertices`, never on label
    /// values.
    pub fn sample<R: Rng>(vertices: Vec<Label>, kappa: usize, rng: &mut R) -> Self {
        let m = vertices.len();
        let mut pooled: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        if m >= 2 {
            for _ in 0..m * kappa {
                let a = rng.random_range(0..m);
                let mut b = rng.random_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                *pooled.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let edges = pooled
            .into_iter()
            .map(|((a, b), multiplicity)| Edge {
                a,
                b,
                multiplicity,
                wins_a: 0,
                wins_b: 0,
                label: None,
            })
            .collect();
        Self {
            vertices,
            edges,
            rounds: 0,
        }
    }

    /// A graph with fixed labels, for tests and oracles. Each entry is
    /// `(i, j, label of (i, j))` over vertex positions.
    pub fn from_labels(vertices: Vec<Label>, labeled: &[(usize, usize, EdgeLabel)]) -> Self {
        let edges = labeled
            .iter()
            .map(|&(i, j, l)| {
                let (a, b, label) = if i < j { (i, j, l) } else { (j, i, l.mirror()) };
                Edge {
                    a,
                    b,
                    multiplicity: 1,
                    wins_a: 0,
                    wins_b: 0,
                    label: Some(label),
                }
            })
            .collect();
        Self {
            vertices,
            edges,
            rounds: 0,
        }
    }

    pub fn vertices(&self) -> &[Label] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Queries per round.
    pub fn round_cost(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    pub fn position(&self, label: Label) -> Option<usize> {
        self.vertices.iter().position(|&v| v == label)
    }

    /// Adds one round of results: `wins[e] = (wins for a, wins for b)`.
    pub(crate) fn absorb_round(&mut self, wins: impl Iterator<Item = (u64, u64)>) {
        for (edge, (wa, wb)) in self.edges.iter_mut().zip(wins) {
            edge.wins_a = wa;
            edge.wins_b = wb;
        }
        self.rounds += 1;
    }

    /// Recomputes every label from cumulative counts. Each edge is labelled
    /// with its own observation count (`rounds * multiplicity`) as `q`.
    /// Returns whether any label changed.
    pub fn relabel(&mut self, rule: &LabelRule, kappa: usize) -> Result<bool, ModelError> {
        let mut changed = false;
        for edge in &mut self.edges {
            let next = rule.label(edge.wins_a, edge.wins_b, edge.observations(), kappa)?;
            if edge.label != Some(next) {
                edge.label = Some(next);
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Directed traversal lists: `(neighbour, strict)` for every step a
    /// label-monotone path may take.
    fn adjacency(&self) -> Vec<Vec<(usize, bool)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            let Some(label) = e.label else { continue };
            if label.traversable() {
                adj[e.a].push((e.b, label.is_strict()));
            }
            let back = label.mirror();
            if back.traversable() {
                adj[e.b].push((e.a, back.is_strict()));
            }
        }
        adj
    }

    /// Vertices `j != source` reachable by a walk of at most `kappa`
    /// traversable edges that uses at least one strict edge.
    ///
    /// Breadth-first search over `(vertex, strict edge used)` states; the
    /// first visit of a state is its shortest hop count.
    fn dominated_from(&self, adj: &[Vec<(usize, bool)>], source: usize, kappa: usize) -> Vec<bool> {
        let m = self.vertices.len();
        let mut dist = vec![[usize::MAX; 2]; m];
        let mut queue = VecDeque::new();
        dist[source][0] = 0;
        queue.push_back((source, 0usize));
        while let Some((v, used)) = queue.pop_front() {
            let d = dist[v][used];
            if d == kappa {
                continue;
            }
            for &(w, strict) in &adj[v] {
                let next = used | strict as usize;
                if dist[w][next] == usize::MAX {
                    dist[w][next] = d + 1;
                    queue.push_back((w, next));
                }
            }
        }
        (0..m).map(|j| j != source && dist[j][1] <= kappa).collect()
    }

    /// The relation `i >>_l j` as `dom[i][j]` over vertex positions.
    pub fn dominance(&self, kappa: usize) -> Vec<Vec<bool>> {
        let adj = self.adjacency();
        (0..self.vertices.len())
            .map(|s| self.dominated_from(&adj, s, kappa))
            .collect()
    }

    /// `i >>_l j`: some walk from `i` to `j` of at most `kappa` edges, every
    /// edge labelled approximately-equal, weakly greater or strictly greater
    /// in the walking direction, at least one of them strictly greater.
    pub fn strictly_dominates(&self, i: Label, j: Label, kappa: usize) -> bool {
        match (self.position(i), self.position(j)) {
            (Some(pi), Some(pj)) => self.dominated_from(&self.adjacency(), pi, kappa)[pj],
            _ => false,
        }
    }

    /// Splits the vertices into confident-top, confident-bottom and the rest.
    pub fn classify(&self, k: usize, kappa: usize) -> PartitionResult {
        classify_relation(&self.vertices, &self.dominance(kappa), k)
    }
}

/// Applies the counting rule to a materialised dominance relation:
/// bottom if at least `k` vertices dominate it, top if it dominates at least
/// `m - k`. A vertex meeting both rules is left unclassified.
pub fn classify_relation(vertices: &[Label], dom: &[Vec<bool>], k: usize) -> PartitionResult {
    let m = vertices.len();
    let mut result = PartitionResult::default();
    for (i, &label) in vertices.iter().enumerate() {
        let dominated_by = (0..m).filter(|&j| j != i && dom[j][i]).count();
        let dominates = (0..m).filter(|&j| j != i && dom[i][j]).count();
        let bottom = dominated_by >= k;
        let top = dominates >= m - k;
        match (top, bottom) {
            (true, false) => {
                result.omega_g.insert(label);
            }
            (false, true) => {
                result.omega_b.insert(label);
            }
            _ => {
                result.remaining.insert(label);
            }
        }
    }
    result
}

/// Labels declared top (`omega_g`), declared bottom (`omega_b`), and the
/// undecided rest. The three sets are disjoint and cover the vertex set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub omega_g: BTreeSet<Label>,
    pub omega_b: BTreeSet<Label>,
    pub remaining: BTreeSet<Label>,
}

impl PartitionResult {
    pub fn decided(&self) -> usize {
        self.omega_g.len() + self.omega_b.len()
    }
}
