//! Command-line front end: configuration, dispatch, worker pool and
//! artifact writing. `main.rs` only forwards to [`run`].

pub mod config;
mod commands;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::RunConfig;

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "PLAQUETTE_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl From<plaquette::Error> for CliError {
    fn from(e: plaquette::Error) -> Self {
        match e {
            plaquette::Error::InvalidParams { .. } | plaquette::Error::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plaquette", version, about = "Covariance, Floquet and exceptional-point analysis of a closed-loop optomechanical plaquette")]
struct Cli {
    /// TOML (or JSON) run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named parameter preset.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory for datasets and the manifest.
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: $PLAQUETTE_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Parameter override, e.g. `--set temperature_k=1.9`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChiralityArg {
    #[value(alias = "cw")]
    Clockwise,
    #[value(alias = "ccw")]
    Counterclockwise,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary covariance at the configured point.
    Steady,
    /// Floquet covariance harmonics under amplitude modulation.
    Floquet,
    /// Eigenvalue loci of the static drift along the loop phase.
    Loci,
    /// Locate one exceptional point.
    EpFind {
        /// Search range of |mu|/(gamma1+gamma2) as LO:HI.
        #[arg(long)]
        box_mu: Option<String>,
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        #[arg(long, value_enum)]
        chirality: Option<ChiralityArg>,
    },
    /// Trace both exceptional-point branches over two parameter multipliers.
    EpSurface {
        /// PARAM:LO:HI:POINTS, PARAM one of kappa, power, gamma, g1, g2, detuning.
        #[arg(long)]
        axis1: Option<String>,
        #[arg(long)]
        axis2: Option<String>,
    },
    /// Run a named figure recipe.
    Figure { name: Option<String> },
    /// Compare the frequency-domain result with time-domain propagation.
    OracleCheck,
    /// Validate the configuration and print derived quantities.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Floquet => "floquet",
            Command::Loci => "loci",
            Command::EpFind { .. } => "ep-find",
            Command::EpSurface { .. } => "ep-surface",
            Command::Figure { .. } => "figure",
            Command::OracleCheck => "oracle-check",
            Command::Validate => "validate",
        }
    }
}

/// What a command produced, for the manifest.
#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
    /// Per-node failures that did not abort the run.
    pub node_failures: Vec<serde_json::Value>,
    /// Printed on stdout.
    #[serde(skip)]
    pub stdout: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: Vec<String>,
    config: &'a RunConfig,
    params_fingerprint: String,
    workers: usize,
    wall_time_s: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
    #[serde(flatten)]
    outcome: &'a Outcome,
}

#[derive(Serialize)]
struct ErrorRecord {
    category: &'static str,
    exit_code: i32,
    message: String,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv_text: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv_text) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let cfg = resolve_config(&cli)?;
    let workers = worker_count(&cfg)?;
    let params = cfg.system_params()?;
    let fingerprint = plaquette::observables::fingerprint(&params);
    let explicit_output = cli.output.is_some() || cfg.output_dir.is_some();
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("plaquette-out"));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("starting worker pool: {e}")))?;
    let start = Instant::now();
    let result = pool.install(|| commands::dispatch(&cli.command, &cfg, &params, &out_dir, explicit_output));
    let wall = start.elapsed().as_secs_f64();

    // validate only writes when an output directory was requested
    if matches!(cli.command, Command::Validate) && !explicit_output {
        return result.map(|o| print!("{}", o.stdout));
    }
    let (outcome, error) = match result {
        Ok(o) => (o, None),
        Err(e) => (Outcome::default(), Some(e)),
    };
    let status = match (&error, outcome.node_failures.is_empty()) {
        (Some(_), _) => "failed",
        (None, true) => "ok",
        (None, false) => "completed_with_node_failures",
    };
    let manifest = Manifest {
        tool: "plaquette",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        argv,
        config: &cfg,
        params_fingerprint: fingerprint,
        workers,
        wall_time_s: wall,
        status,
        error: error.as_ref().map(|e| ErrorRecord {
            category: e.category(),
            exit_code: e.exit_code(),
            message: e.to_string(),
        }),
        outcome: &outcome,
    };
    // an I/O failure cannot be recorded on disk; report the original error
    let written = output::write_json(&out_dir, "manifest.json", &manifest);
    if let Some(e) = error {
        return Err(e);
    }
    written?;
    print!("{}", outcome.stdout);
    Ok(())
}

/// Config file, then global flags, then subcommand flags.
fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => RunConfig {
            preset: "default".into(),
            ..Default::default()
        },
    };
    if let Some(p) = &cli.preset {
        cfg.preset = p.clone();
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if !cli.set.is_empty() {
        cfg.params = apply_sets(&cfg.params, &cli.set)?;
    }
    match &cli.command {
        Command::EpFind {
            box_mu,
            branch,
            chirality,
        } => {
            if let Some(b) = box_mu {
                let (lo, hi) = parse_range(b)?;
                cfg.ep.mu_min = lo;
                cfg.ep.mu_max = hi;
            }
            if let Some(b) = branch {
                cfg.ep.branch = Some(match b {
                    BranchArg::Upper => plaquette::spectral::Branch::Upper,
                    BranchArg::Lower => plaquette::spectral::Branch::Lower,
                });
            }
            if let Some(c) = chirality {
                cfg.ep.chirality = match c {
                    ChiralityArg::Clockwise => plaquette::spectral::Chirality::Clockwise,
                    ChiralityArg::Counterclockwise => plaquette::spectral::Chirality::Counterclockwise,
                };
            }
        }
        Command::EpSurface { axis1, axis2 } => {
            if let Some(a) = axis1 {
                cfg.surface.axis1 = parse_axis(a)?;
            }
            if let Some(a) = axis2 {
                cfg.surface.axis2 = parse_axis(a)?;
            }
        }
        Command::Figure { name } => {
            if let Some(n) = name {
                cfg.figure.name = Some(n.clone());
            }
            if cfg.figure.name.is_none() {
                return Err(CliError::Config("figure: no recipe name given".into()));
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_sets(params: &config::ParamsConfig, sets: &[String]) -> Result<config::ParamsConfig, CliError> {
    let mut table = toml::Table::try_from(params).map_err(|e| CliError::Config(e.to_string()))?;
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        let value: toml::Value = match format!("v = {}", v.trim()).parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => toml::Value::String(v.trim().to_string()),
        };
        table.insert(k.trim().to_string(), value);
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("--set: {e}")))
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("not a number: `{s}`")))
}

fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("expected LO:HI, got `{s}`")))?;
    Ok((parse_f64(lo)?, parse_f64(hi)?))
}

fn parse_axis(s: &str) -> Result<config::AxisConfig, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [param, lo, hi, points] = parts[..] else {
        return Err(CliError::Config(format!("expected PARAM:LO:HI:POINTS, got `{s}`")));
    };
    let param = serde_json::from_value(serde_json::Value::String(param.to_string()))
        .map_err(|_| CliError::Config(format!("unknown surface parameter `{param}`")))?;
    let points = points
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("not a point count: `{points}`")))?;
    Ok(config::AxisConfig {
        param,
        lo: parse_f64(lo)?,
        hi: parse_f64(hi)?,
        points,
    })
}

fn worker_count(cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(w) = cfg.workers {
        return Ok(w);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}
