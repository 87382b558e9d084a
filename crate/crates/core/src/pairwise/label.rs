use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Five-way confidence label of an edge `(i, j)`, read from `i`'s side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeLabel {
    ApproxEq,
    GeqWeak,
    GtStrong,
    LeqWeak,
    LtStrong,
}

impl EdgeLabel {
    /// The label of `(j, i)` given the label of `(i, j)`.
    pub fn mirror(self) -> Self {
        match self {
            EdgeLabel::ApproxEq => EdgeLabel::ApproxEq,
            EdgeLabel::GeqWeak => EdgeLabel::LeqWeak,
            EdgeLabel::GtStrong => EdgeLabel::LtStrong,
            EdgeLabel::LeqWeak => EdgeLabel::GeqWeak,
            EdgeLabel::LtStrong => EdgeLabel::GtStrong,
        }
    }

    /// May a monotone path step from `i` to `j` over this edge?
    pub fn traversable(self) -> bool {
        matches!(self, EdgeLabel::ApproxEq | EdgeLabel::GeqWeak | EdgeLabel::GtStrong)
    }

    pub fn is_strict(self) -> bool {
        self == EdgeLabel::GtStrong
    }
}

/// Ratio thresholds for edge labels after `q` observations:
/// approximate band `1 + approx * sqrt(kappa / q)` and strict cut
/// `1 + strict * kappa * sqrt(kappa / q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub approx: f64,
    pub strict: f64,
}

impl Default for LabelRule {
    fn default() -> Self {
        Self::REFERENCE
    }
}

impl LabelRule {
    /// Coefficients under which the label-soundness guarantees are stated.
    pub const REFERENCE: LabelRule = LabelRule {
        approx: 4.0,
        strict: 32.0,
    };

    /// Smaller strict coefficient for small-budget experiments. Still keeps
    /// `strict * kappa` well above the `approx * (kappa - 1)` slack a path
    /// of approximate edges can accumulate.
    pub const DESK: LabelRule = LabelRule {
        approx: 4.0,
        strict: 8.0,
    };

    /// Returns `(1 + a, 1 + b)`.
    pub fn thresholds(&self, q: u64, kappa: usize) -> (f64, f64) {
        let root = (kappa as f64 / q as f64).sqrt();
        (1.0 + self.approx * root, 1.0 + self.strict * kappa as f64 * root)
    }

    /// Labels edge `(i, j)` from its win counts. The ratio
    /// `wins_ij / wins_ji` is never formed; each interval test is a
    /// cross-multiplied comparison, so `label(a, b)` and `label(b, a)` are
    /// exact mirrors and a zero count behaves like an infinite ratio.
    pub fn label(&self, wins_ij: u64, wins_ji: u64, q: u64, kappa: usize) -> Result<EdgeLabel, ModelError> {
        if wins_ij + wins_ji == 0 || q == 0 {
            return Err(ModelError::NoObservations);
        }
        let (a, b) = self.thresholds(q, kappa);
        let (wi, wj) = (wins_ij as f64, wins_ji as f64);
        Ok(if wi >= b * wj {
            EdgeLabel::GtStrong
        } else if wj >= b * wi {
            EdgeLabel::LtStrong
        } else if wi > a * wj {
            EdgeLabel::GeqWeak
        } else if wj > a * wi {
            EdgeLabel::LeqWeak
        } else {
            EdgeLabel::ApproxEq
        })
    }
}

/// Labels with the reference coefficients (4 and 32).
pub fn label_edge(wins_ij: u64, wins_ji: u64, q: u64, kappa: usize) -> Result<EdgeLabel, ModelError> {
    LabelRule::REFERENCE.label(wins_ij, wins_ji, q, kappa)
}
