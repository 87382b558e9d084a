//! Command-line front end: instance generation, seeded experiment batches,
//! bound evaluation and oracle checks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use rankbench::complexity::{simplified_constant_l, upper_bound};
use rankbench::experiment::{self, ExperimentSpec, Family, InstanceSource};
use rankbench::model::{make_labeled, InstanceFile};
use rankbench::pairwise::LabelRule;
use rankbench::rng::{self, tag};
use rankbench::verify::{self, exact_choice_distribution, levels, TrialSummary};
use rankbench::{Algorithm, Environment, Exec, Instance, ModelError, TopKConfig};

#[derive(Parser)]
#[command(name = "rankbench", version, about = "Active top-k identification under the MNL choice model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file for a generator family.
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        /// Seed stored in the file.
        #[arg(long, env = "RANKBENCH_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an algorithm over a batch of seeds and write one CSV row per seed.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sample complexity breakdown of an instance.
    Bound {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        json: bool,
    },
    /// Check the choice oracle against exact probabilities and estimate the
    /// success rate of an algorithm.
    Verify {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        tuning: TuningArgs,
        /// Draws per comparison set in the goodness-of-fit check.
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Geometric,
    TwoBlock,
    NearTie,
    Custom,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyName>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Geometric ratio.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Two-block scores.
    #[arg(long, default_value_t = 100.0)]
    hi: f64,
    #[arg(long, default_value_t = 1.0)]
    lo: f64,
    /// Near-tie gap.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Custom scores, comma separated and sorted descending.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    /// Accept a tie at the top-k boundary.
    #[arg(long)]
    allow_tie: bool,
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Instance file (JSON). Overrides the generator flags.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleName {
    Reference,
    Desk,
}

#[derive(Args, Clone)]
struct TuningArgs {
    #[arg(long, default_value = "auto")]
    algorithm: String,
    /// A count (`100`), a list (`3,7,9`) or a half-open range (`10..20`).
    #[arg(long, default_value = "10")]
    seeds: String,
    /// First seed when `--seeds` is a count.
    #[arg(long, env = "RANKBENCH_SEED")]
    seed_start: Option<u64>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    l_threshold_factor: Option<f64>,
    /// Largest per-subset repetition count the doubling loop may reach.
    #[arg(long)]
    q_cap: Option<u64>,
    /// Edge-label coefficients.
    #[arg(long, value_enum, default_value = "reference")]
    label_rule: RuleName,
    /// Run seeds one after another.
    #[arg(long)]
    sequential: bool,
}

/// Bad input or I/O problems (exit 1) versus invariant breaches (exit 2).
enum Failure {
    Input(String),
    Internal(String),
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn family_of(args: &FamilyArgs) -> Result<(Family, usize, usize, usize), Failure> {
    let name = args
        .family
        .ok_or_else(|| Failure::Input("pass --instance or --family".into()))?;
    let family = match name {
        FamilyName::Geometric => Family::Geometric { rho: args.rho },
        FamilyName::TwoBlock => Family::TwoBlock {
            hi: args.hi,
            lo: args.lo,
        },
        FamilyName::NearTie => Family::NearTie { eps: args.eps },
        FamilyName::Custom => Family::Custom {
            theta: args.theta.clone(),
        },
    };
    let n = match (args.n, name) {
        (Some(n), _) => n,
        (None, FamilyName::Custom) => args.theta.len(),
        (None, _) => return Err(Failure::Input("--n is required".into())),
    };
    let k = args.k.ok_or_else(|| Failure::Input("--k is required".into()))?;
    let l = args.l.unwrap_or(2);
    Ok((family, n, k, l))
}

fn source_of(args: &SourceArgs) -> Result<InstanceSource, Failure> {
    if let Some(path) = &args.instance {
        return Ok(InstanceSource::File(path.clone()));
    }
    let (family, n, k, l) = family_of(&args.family)?;
    Ok(InstanceSource::Generated {
        family,
        n,
        k,
        l,
        allow_tie: args.family.allow_tie,
    })
}

fn parse_seeds(text: &str, start: u64) -> Result<Vec<u64>, Failure> {
    let bad = |e: std::num::ParseIntError| Failure::Input(format!("--seeds `{text}`: {e}"));
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().map_err(bad)?, b.trim().parse::<u64>().map_err(bad)?);
        (a..b).collect()
    } else if text.contains(',') {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<u64>().map_err(bad))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        experiment::seed_range(start, text.trim().parse::<u64>().map_err(bad)?)
    };
    if seeds.is_empty() {
        return Err(Failure::Input("--seeds selects no seeds".into()));
    }
    Ok(seeds)
}

fn config_of(tuning: &TuningArgs, instance: &Instance) -> Result<TopKConfig, Failure> {
    let algorithm: Algorithm = tuning.algorithm.parse()?;
    let mut config = TopKConfig::for_n(instance.n()).with_algorithm(algorithm);
    if let Some(kappa) = tuning.kappa {
        config = config.with_kappa(kappa);
    }
    if let Some(alpha) = tuning.alpha {
        config.multiwise.alpha = alpha;
    }
    if let Some(budget) = tuning.budget {
        config = config.with_budget(budget);
    }
    if let Some(factor) = tuning.l_threshold_factor {
        config.multiwise.l_threshold_factor = factor;
    }
    if let Some(cap) = tuning.q_cap {
        config.multiwise.q_cap = cap;
    }
    config = config.with_rule(match tuning.label_rule {
        RuleName::Reference => LabelRule::REFERENCE,
        RuleName::Desk => LabelRule::DESK,
    });
    config.pairwise.validate()?;
    config.multiwise.validate()?;
    Ok(config)
}

fn exec_of(tuning: &TuningArgs) -> Exec {
    if tuning.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::Input(format!("{}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn spec_of(source: &SourceArgs, tuning: &TuningArgs) -> Result<ExperimentSpec, Failure> {
    let (instance, id, file_seed) = source_of(source)?.load()?;
    let start = tuning.seed_start.or(file_seed).unwrap_or(0);
    let seeds = parse_seeds(&tuning.seeds, start)?;
    let config = config_of(tuning, &instance)?;
    Ok(ExperimentSpec::new(id, instance, seeds, config)?)
}

fn gen(family: &FamilyArgs, seed: u64, out: &Option<PathBuf>) -> Result<(), Failure> {
    let (fam, n, k, l) = family_of(family)?;
    let instance = experiment::generate(&fam, n, k, l, family.allow_tie)?;
    let mut w = output(out)?;
    writeln!(w, "{}", InstanceFile::from_instance(&instance, seed).to_json())?;
    Ok(())
}

fn run(source: &SourceArgs, tuning: &TuningArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let spec = spec_of(source, tuning)?;
    let result = experiment::run(&spec, exec_of(tuning));
    experiment::write_csv(&result.rows, output(out)?)?;
    for o in result.outcomes.iter().filter(|o| o.error.is_some()) {
        eprintln!("seed {}: {}", o.seed, o.error.as_deref().unwrap_or_default());
    }
    match result.internal_errors() {
        0 => Ok(()),
        e => Err(Failure::Internal(format!("{e} seeds breached an internal invariant"))),
    }
}

fn bound(source: &SourceArgs, json: bool) -> Result<(), Failure> {
    let (instance, id, _) = source_of(source)?.load()?;
    let b = upper_bound(&instance);
    let simplified = (instance.l() <= 4).then(|| simplified_constant_l(&instance));
    let mut out = io::stdout().lock();
    if json {
        let value = serde_json::json!({
            "instance_id": id,
            "breakdown": b,
            "total": if b.unbounded { serde_json::Value::from("unbounded") } else { b.total.into() },
            "simplified_constant_l": simplified.map(|s| if s.is_finite() { s.into() } else { serde_json::Value::from("unbounded") }),
        });
        writeln!(out, "{value:#}")?;
    } else {
        writeln!(out, "instance     {id} (n={}, k={}, l={})", instance.n(), instance.k(), instance.l())?;
        writeln!(out, "{b}")?;
        if let Some(s) = simplified {
            if s.is_finite() {
                writeln!(out, "simplified   {s}")?;
            } else {
                writeln!(out, "simplified   unbounded (θ_k = θ_{{k+1}})")?;
            }
        }
    }
    Ok(())
}

fn verify_cmd(source: &SourceArgs, tuning: &TuningArgs, draws: u64) -> Result<(), Failure> {
    let spec = spec_of(source, tuning)?;
    let instance = &spec.instance;
    let labeled = make_labeled(instance.clone(), spec.seeds[0]);
    let mut pick = rng::stream(spec.seeds[0], &[tag::VERIFY]);
    let mut fits = Vec::new();
    for set_index in 0..5u64 {
        let size = pick.random_range(2..=instance.l());
        let ranks: Vec<usize> = rand::seq::index::sample(&mut pick, instance.n(), size).into_vec();
        let exact = exact_choice_distribution(instance, &ranks)?;
        let labels: Vec<_> = ranks.iter().map(|&r| labeled.label_of(r)).collect();
        let mut env = Environment::new(&labeled, draws);
        let mut unit = [env
            .unit(labels, draws, &[tag::VERIFY, set_index])
            .map_err(Failure::from)?];
        env.run_units(&mut unit, None)
            .map_err(|e| Failure::Internal(e.to_string()))?;
        let (stat, p) = verify::chi_square(unit[0].wins(), &exact);
        fits.push(serde_json::json!({
            "ranks": ranks,
            "chi_square": stat,
            "p_value": p,
            "pass": p > levels::CHI_SQUARE,
        }));
    }
    let result = experiment::run(&spec, exec_of(tuning));
    let summary = TrialSummary::from_outcomes(&result.outcomes);
    let value = serde_json::json!({
        "instance_id": spec.instance_id,
        "oracle_fit": fits,
        "success": summary,
    });
    writeln!(io::stdout().lock(), "{value:#}")?;
    if result.internal_errors() > 0 {
        return Err(Failure::Internal("a run breached an internal invariant".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { family, seed, out } => gen(family, *seed, out),
        Command::Run { source, tuning, out } => run(source, tuning, out),
        Command::Bound { source, json } => bound(source, *json),
        Command::Verify {
            source,
            tuning,
            draws,
        } => verify_cmd(source, tuning, *draws),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
