//! Instance-dependent sample complexity expressions.
//!
//! With `θ_k` the k-th largest score (one-based), the bound reads
//!
//! ```text
//! n/l + k + Σ_{i>k} θ_i/θ_k
//!       + Σ_{i>k, θ_i ≥ θ_k/2} θ_k² / (θ_k − θ_i)²
//!       + Σ_{i≤k, θ_i ≤ 2θ_{k+1}} θ_{k+1}² / (θ_{k+1} − θ_i)²
//! ```
//!
//! and is both achievable (up to polylog factors) and necessary. A tie
//! `θ_k = θ_{k+1}` makes a gap term diverge; the breakdown then reports
//! `unbounded` with an infinite total.

use std::fmt;

use serde::Serialize;

use crate::model::Instance;

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn csum(iter: impl IntoIterator<Item = f64>) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityBreakdown {
    pub term_n_over_l: f64,
    pub term_k: f64,
    pub term_tail_mass: f64,
    pub term_bottom_gap: f64,
    pub term_top_gap: f64,
    pub total: f64,
    /// `θ_k = θ_{k+1}`; gap terms and total are infinite.
    pub unbounded: bool,
}

impl fmt::Display for ComplexityBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n/l          {}", self.term_n_over_l)?;
        writeln!(f, "k            {}", self.term_k)?;
        writeln!(f, "tail mass    {}", self.term_tail_mass)?;
        writeln!(f, "bottom gap   {}", self.term_bottom_gap)?;
        writeln!(f, "top gap      {}", self.term_top_gap)?;
        if self.unbounded {
            write!(f, "total        unbounded (θ_k = θ_{{k+1}})")
        } else {
            write!(f, "total        {}", self.total)
        }
    }
}

/// Evaluates the bound on the first `m` scores of `theta` (sorted
/// descending) with target `k` and set size `l`.
fn breakdown(theta: &[f64], k: usize, l: usize) -> ComplexityBreakdown {
    let m = theta.len();
    let tk = theta[k - 1];
    let tk1 = theta[k];
    let unbounded = tk == tk1;
    let tail = csum(theta[k..].iter().map(|&t| t / tk));
    let (bottom, top) = if unbounded {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let bottom = csum(
            theta[k..]
                .iter()
                .filter(|&&t| t >= tk / 2.0)
                .map(|&t| tk * tk / ((tk - t) * (tk - t))),
        );
        let top = csum(
            theta[..k]
                .iter()
                .filter(|&&t| t <= 2.0 * tk1)
                .map(|&t| tk1 * tk1 / ((tk1 - t) * (tk1 - t))),
        );
        (bottom, top)
    };
    let n_over_l = m as f64 / l as f64;
    let total = if unbounded {
        f64::INFINITY
    } else {
        csum([n_over_l, k as f64, tail, bottom, top])
    };
    ComplexityBreakdown {
        term_n_over_l: n_over_l,
        term_k: k as f64,
        term_tail_mass: tail,
        term_bottom_gap: bottom,
        term_top_gap: top,
        total,
        unbounded,
    }
}

/// Queries sufficient (up to polylog factors) to find the top `k`.
pub fn upper_bound(instance: &Instance) -> ComplexityBreakdown {
    breakdown(instance.theta(), instance.k(), instance.l())
}

/// Queries necessary for any algorithm to succeed with probability above
/// 7/8. The expression coincides with [`upper_bound`].
pub fn lower_bound(instance: &Instance) -> ComplexityBreakdown {
    breakdown(instance.theta(), instance.k(), instance.l())
}

/// The constant-`l` form
/// `Σ_{i>k} θ_k²/(θ_k − θ_i)² + Σ_{i≤k} θ_i²/(θ_{k+1} − θ_i)²`.
/// Infinite on a tie at the boundary.
pub fn simplified_constant_l(instance: &Instance) -> f64 {
    let theta = instance.theta();
    let k = instance.k();
    let (tk, tk1) = (theta[k - 1], theta[k]);
    if tk == tk1 {
        return f64::INFINITY;
    }
    let bottom = theta[k..].iter().map(|&t| tk * tk / ((tk - t) * (tk - t)));
    let top = theta[..k].iter().map(|&t| t * t / ((tk1 - t) * (tk1 - t)));
    csum(bottom.chain(top))
}

/// Both sides of the inequality stating that larger sets cannot beat pairs
/// by more than `4m` on the gap terms, evaluated on the first `m` scores.
pub fn big_l_sides(theta: &[f64], k: usize, l: usize) -> (f64, f64) {
    let m = theta.len();
    let (tk, tk1) = (theta[k - 1], theta[k]);
    if tk == tk1 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let lhs_bottom = csum(theta[k..].iter().map(|&t| tk * tk / ((tk - t) * (tk - t))));
    let b = breakdown(theta, k, l);
    let lhs = csum([k as f64, lhs_bottom, b.term_top_gap]);
    let rhs = csum([b.total, 4.0 * m as f64]);
    (lhs, rhs)
}

/// The inequality at `m = n`, and at every prefix `m` with `k < m` and
/// `l <= m`. Ties count as satisfied.
pub fn check_big_l(instance: &Instance) -> bool {
    let theta = instance.theta();
    let (k, l) = (instance.k(), instance.l());
    (k + 1..=theta.len()).filter(|&m| m >= l).all(|m| {
        let (lhs, rhs) = big_l_sides(&theta[..m], k, l);
        lhs.is_infinite() || lhs <= rhs * (1.0 + 1e-12)
    })
}
