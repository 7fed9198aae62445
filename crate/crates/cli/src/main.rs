//! `fusedlasso`: solve, bound, and simulate from the command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 violated precondition (delta range, admissibility).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fusedlasso::bounds::{bound_report, BoundParams};
use fusedlasso::lil::{verify_paths, LilEnvelope, LilRun};
use fusedlasso::simulation::{self, config_hash, write_atomic, ExperimentSpec, Table, TOOL};
use fusedlasso::{Error, FusedLassoProblem, NoiseKind, NoiseModel, PiecewiseConstantSignal};
use serde::Serialize;

use config::{BoundsConfig, BoundsRun, LilConfig, LilRunConfig, LossKind, SolveConfig, SolveRun};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_precondition() => 3,
            CliError::Core(
                Error::Config(_) | Error::InvalidInput(_) | Error::InvalidSignal(_) | Error::Unsupported(_),
            ) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "configuration error: {s}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fusedlasso", version, about = "Fused lasso solver, error bounds and simulations")]
struct Cli {
    /// Seed for stochastic subcommands (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// TOML configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "FUSEDLASSO_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance read from a one-column CSV.
    Solve(SolveArgs),
    /// Evaluate every bound for a signal geometry.
    Bounds(BoundsArgs),
    /// Check the partial-sum envelope by simulation.
    Lil(LilArgs),
    /// Run an experiment described by `--config`.
    Simulate,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// One value per line, no header.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossKind>,
    /// Quantile level (quantile loss only, default 0.5).
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Segment values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    /// Segment lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    /// Sub-Gaussian parameter of the noise (default 1).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Growth constant; enables the quantile-regression bounds.
    #[arg(long)]
    growth_l: Option<f64>,
}

#[derive(Debug, Args)]
struct LilArgs {
    /// Envelope scale parameter (default 1).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Horizon T.
    #[arg(long)]
    horizon: Option<u64>,
    /// Number of simulated paths R.
    #[arg(long)]
    paths: Option<usize>,
    /// Noise family (default gaussian).
    #[arg(long)]
    noise: Option<String>,
    /// Noise scale (defaults to sigma).
    #[arg(long)]
    scale: Option<f64>,
    /// Multiplier on the envelope (default 1).
    #[arg(long)]
    envelope_scale: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("fusedlasso: cannot set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fusedlasso: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::Solve(a) => solve(a, config::load(cfg)?, &cli.out_dir),
        Command::Bounds(a) => bounds(a, config::load(cfg)?, &cli.out_dir),
        Command::Lil(a) => lil(a, config::load(cfg)?, cli.seed, &cli.out_dir),
        Command::Simulate => simulate(cfg, cli.seed, &cli.out_dir),
    }
}

#[derive(Serialize)]
struct Header<'a, T: Serialize> {
    tool: &'static str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: &Path, hash: &str, body: T) -> Result<(), CliError> {
    let doc = Header { tool: TOOL, config_hash: hash, body };
    let mut s = serde_json::to_string_pretty(&doc).expect("output serializes");
    s.push('\n');
    Ok(write_atomic(path, s.as_bytes())?)
}

fn solve(a: &SolveArgs, c: SolveConfig, out: &Path) -> Result<(), CliError> {
    let input = config::require(a.input.clone().or(c.input), "input")?;
    let lambda = config::require(a.lambda.or(c.lambda), "lambda")?;
    let kind = a.loss.or(c.loss).unwrap_or(LossKind::Square);
    let loss = config::loss_model(kind, a.tau.or(c.tau))?;
    let y = config::read_column(&input)?;
    let run = SolveRun { lambda, loss, y };
    let hash = config_hash(&run);
    let problem = FusedLassoProblem::new(run.y.clone(), lambda, loss)?;
    let sol = problem.solve()?;

    let mut t = Table::new(&["i", "y", "theta_hat", "z"]);
    for (i, (&y, &th)) in run.y.iter().zip(&sol.theta_hat).enumerate() {
        let z = sol.dual_z.get(i).map(|v| v.to_string()).unwrap_or_default();
        t.push(vec![(i + 1).to_string(), y.to_string(), th.to_string(), z]);
    }
    t.write(&out.join("solution.csv"), &hash)?;

    #[derive(Serialize)]
    struct Summary {
        n: usize,
        lambda: f64,
        loss: fusedlasso::LossModel,
        objective: f64,
        kkt_residual: f64,
    }
    write_json(
        &out.join("solution.json"),
        &hash,
        Summary {
            n: run.y.len(),
            lambda,
            loss,
            objective: sol.objective_value,
            kkt_residual: sol.kkt_residual,
        },
    )
}

fn bounds(a: &BoundsArgs, c: BoundsConfig, out: &Path) -> Result<(), CliError> {
    let signal = match (&a.values, &a.lengths) {
        (Some(v), Some(l)) => PiecewiseConstantSignal::new(v.clone(), l.clone())?,
        (None, None) => config::require(c.signal, "signal")?,
        _ => return Err(CliError::Config("--values and --lengths go together".into())),
    };
    let params = BoundParams {
        sigma: a.sigma.or(c.sigma).unwrap_or(1.0),
        delta: config::require(a.delta.or(c.delta), "delta")?,
        lambda: config::require(a.lambda.or(c.lambda), "lambda")?,
        growth_l: a.growth_l.or(c.growth_l),
    };
    let run = BoundsRun { signal, params };
    let hash = config_hash(&run);
    let report = bound_report(&run.signal.geometry(), &params)?;

    let mut t = Table::new(&["i", "k", "d", "B", "B_improved", "B_quantile", "applicable"]);
    for b in &report.indices {
        t.push(vec![
            b.i.to_string(),
            b.k.to_string(),
            b.d.to_string(),
            b.b.to_string(),
            b.b_improved.to_string(),
            b.b_quantile.to_string(),
            b.applicable.map(|x| x.to_string()).unwrap_or_default(),
        ]);
    }
    t.write(&out.join("bounds.csv"), &hash)?;
    write_json(&out.join("bounds.json"), &hash, &report)
}

fn noise_kind(name: &str) -> Result<NoiseKind, CliError> {
    serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase()))
        .map_err(|_| CliError::Config(format!("unknown noise `{name}`")))
}

fn lil(a: &LilArgs, c: LilConfig, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let sigma = a.sigma.or(c.sigma).unwrap_or(1.0);
    let noise = match &a.noise {
        Some(n) => noise_kind(n)?,
        None => c.noise.unwrap_or(NoiseKind::Gaussian),
    };
    let cfg = LilRunConfig {
        sigma,
        delta: config::require(a.delta.or(c.delta), "delta")?,
        noise,
        scale: a.scale.or(c.scale).unwrap_or(sigma),
        run: LilRun {
            horizon: config::require(a.horizon.or(c.horizon), "horizon")?,
            paths: config::require(a.paths.or(c.paths), "paths")?,
            seed: config::require(seed.or(c.seed), "seed")?,
            envelope_scale: a.envelope_scale.or(c.envelope_scale).unwrap_or(1.0),
        },
    };
    let hash = config_hash(&cfg);
    let env = LilEnvelope::new(cfg.sigma, cfg.delta)?;
    let model = NoiseModel::new(cfg.noise, cfg.scale)?;
    let res = verify_paths(&model, &env, &cfg.run)?;

    let mut t = Table::new(&["t", "envelope", "q50", "q90", "q99", "max"]);
    for q in &res.checkpoints {
        t.push(vec![
            q.t.to_string(),
            (cfg.run.envelope_scale * env.at(q.t)).to_string(),
            q.q50.to_string(),
            q.q90.to_string(),
            q.q99.to_string(),
            q.max.to_string(),
        ]);
    }
    t.write(&out.join("lil.csv"), &hash)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        noise: NoiseKind,
        scale: f64,
        #[serde(flatten)]
        result: &'a fusedlasso::lil::LilResult,
    }
    write_json(
        &out.join("lil.json"),
        &hash,
        Summary {
            noise: cfg.noise,
            scale: cfg.scale,
            result: &res,
        },
    )
}

fn simulate(cfg: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let path = config::require(cfg, "config")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut spec = ExperimentSpec::from_toml(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let result = simulation::run(&spec)?;
    simulation::write_outputs(&result, out)?;
    for c in &result.checks {
        eprintln!(
            "{:<32} observed {:<12.6} bound {:<12.6} {}{}",
            c.name,
            c.observed,
            c.bound,
            if c.passed { "ok" } else { "FAIL" },
            if c.guaranteed { "" } else { " (outside guarantee)" }
        );
    }
    for n in &result.notices {
        eprintln!("note: {n}");
    }
    Ok(())
}
