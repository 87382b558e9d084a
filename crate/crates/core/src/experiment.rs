//! Instance families and seeded experiment batches with CSV output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::complexity::upper_bound;
use crate::driver::{Algorithm, TopKConfig};
use crate::error::ModelError;
use crate::exec::{self, Exec};
use crate::model::{read_instance, Instance};
use crate::verify::{run_trial, TrialOutcome};

/// Column order of result files.
pub const CSV_HEADER: &str = "instance_id,n,k,l,algorithm,seed,queries_used,success,elapsed_ms,bound_total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `θ_i = ρ^i` for ranks `i = 0..n`.
    Geometric { rho: f64 },
    /// `k` items at `hi`, the rest at `lo`.
    TwoBlock { hi: f64, lo: f64 },
    /// `k` items at `1 + eps`, the rest at 1.
    NearTie { eps: f64 },
    Custom { theta: Vec<f64> },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Geometric { rho } => write!(f, "geometric-rho{rho}"),
            Family::TwoBlock { hi, lo } => write!(f, "two-block-{hi}-{lo}"),
            Family::NearTie { eps } => write!(f, "near-tie-eps{eps}"),
            Family::Custom { .. } => f.write_str("custom"),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidField {
        field,
        reason: reason.into(),
    }
}

/// Builds an instance of `family`. Families whose parameters put a tie at
/// the top-k boundary are rejected unless `allow_tie`.
pub fn generate(family: &Family, n: usize, k: usize, l: usize, allow_tie: bool) -> Result<Instance, ModelError> {
    let theta = match family {
        Family::Geometric { rho } => {
            if !(*rho > 0.0 && *rho <= 1.0) {
                return Err(invalid("rho", "must lie in (0, 1]"));
            }
            (0..n).map(|i| rho.powi(i as i32)).collect()
        }
        Family::TwoBlock { hi, lo } => {
            if !(hi >= lo) {
                return Err(invalid("hi", "must be at least lo"));
            }
            (0..n).map(|i| if i < k { *hi } else { *lo }).collect()
        }
        Family::NearTie { eps } => {
            if !(*eps >= 0.0 && eps.is_finite()) {
                return Err(invalid("eps", "must be finite and non-negative"));
            }
            (0..n).map(|i| if i < k { 1.0 + eps } else { 1.0 }).collect()
        }
        Family::Custom { theta } => {
            if theta.len() != n {
                return Err(invalid("theta", format!("has {} entries, expected n = {n}", theta.len())));
            }
            theta.clone()
        }
    };
    let instance = Instance::new(theta, k, l)?;
    if instance.has_boundary_tie() && !allow_tie {
        return Err(invalid(
            "family",
            format!("{family} gives θ_k = θ_{{k+1}}; pass allow_tie to run it anyway"),
        ));
    }
    Ok(instance)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    File(std::path::PathBuf),
    Generated {
        family: Family,
        n: usize,
        k: usize,
        l: usize,
        allow_tie: bool,
    },
}

impl InstanceSource {
    /// The instance, a short identifier, and the seed stored in the file
    /// (if any).
    pub fn load(&self) -> Result<(Instance, String, Option<u64>), ModelError> {
        match self {
            InstanceSource::File(path) => {
                let (instance, seed) = read_instance(path)?;
                let id = Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "instance".into());
                Ok((instance, id, Some(seed)))
            }
            InstanceSource::Generated {
                family,
                n,
                k,
                l,
                allow_tie,
            } => {
                let instance = generate(family, *n, *k, *l, *allow_tie)?;
                Ok((instance, format!("{family}-n{n}-k{k}-l{l}"), None))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub instance_id: String,
    pub instance: Instance,
    pub seeds: Vec<u64>,
    pub config: TopKConfig,
}

impl ExperimentSpec {
    pub fn new(instance_id: String, instance: Instance, seeds: Vec<u64>, config: TopKConfig) -> Result<Self, ModelError> {
        if seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        config.pairwise.validate()?;
        config.multiwise.validate()?;
        Ok(Self {
            instance_id,
            instance,
            seeds,
            config,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }
}

/// One CSV data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub algorithm: String,
    pub seed: u64,
    pub queries_used: u64,
    pub success: bool,
    pub elapsed_ms: f64,
    pub bound_total: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub outcomes: Vec<TrialOutcome>,
}

impl ExperimentOutput {
    /// Seeds whose run hit an internal invariant breach.
    pub fn internal_errors(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.error.as_deref() == Some("internal"))
            .count()
    }
}

/// Runs every seed. Rows come back in seed order whatever the execution
/// mode; failed seeds produce rows with `success = false`.
pub fn run(spec: &ExperimentSpec, exec: Exec) -> ExperimentOutput {
    let instance = &spec.instance;
    let bound_total = upper_bound(instance).total;
    let algorithm = spec.config.resolve(instance.n(), instance.l()).to_string();
    let timed = exec::map(exec, &spec.seeds, |&seed| {
        let start = Instant::now();
        let outcome = run_trial(instance, &spec.config, seed);
        (outcome, start.elapsed().as_secs_f64() * 1e3)
    });
    let mut rows = Vec::with_capacity(timed.len());
    let mut outcomes = Vec::with_capacity(timed.len());
    for (outcome, elapsed_ms) in timed {
        rows.push(ResultRow {
            instance_id: spec.instance_id.clone(),
            n: instance.n(),
            k: instance.k(),
            l: instance.l(),
            algorithm: algorithm.clone(),
            seed: outcome.seed,
            queries_used: outcome.queries_used,
            success: outcome.success,
            elapsed_ms,
            bound_total,
        });
        outcomes.push(outcome);
    }
    ExperimentOutput { rows, outcomes }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// A seed list `start, start + 1, ...` of length `count`.
pub fn seed_range(start: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| start.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_frozen() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "instance_id,n,k,l,algorithm,seed,queries_used,success,elapsed_ms,bound_total\n"
        );
    }

    #[test]
    fn family_examples() {
        let g = generate(&Family::Geometric { rho: 0.5 }, 4, 1, 2, false).unwrap();
        assert_eq!(g.theta(), &[1.0, 0.5, 0.25, 0.125]);
        let t = generate(&Family::TwoBlock { hi: 100.0, lo: 1.0 }, 4, 2, 2, false).unwrap();
        assert_eq!(t.theta(), &[100.0, 100.0, 1.0, 1.0]);
        assert!(generate(&Family::NearTie { eps: 0.0 }, 4, 2, 2, false).is_err());
        assert!(generate(&Family::NearTie { eps: 0.0 }, 4, 2, 2, true).is_ok());
        assert!(generate(&Family::Geometric { rho: 1.5 }, 4, 1, 2, false).is_err());
        assert!(generate(&Family::Custom { theta: vec![2.0, 1.0] }, 3, 1, 2, false).is_err());
    }

    #[test]
    fn rows_per_seed_in_order() {
        let instance = generate(&Family::Geometric { rho: 0.2 }, 4, 1, 2, false).unwrap();
        let config = TopKConfig::for_n(4);
        let spec = ExperimentSpec::new("g".into(), instance, vec![9, 3, 5], config).unwrap();
        let out = run(&spec, Exec::default());
        assert_eq!(out.rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![9, 3, 5]);
        assert!(out.rows.iter().all(|r| r.algorithm == "pairwise"));
        assert!(ExperimentSpec::new("g".into(), spec.instance.clone(), vec![], spec.config.clone()).is_err());
    }
}
