//! Command-line front end: reads a JSON experiment config, runs one
//! experiment and writes `<experiment>_<name>.csv` files plus a
//! `manifest.json` into the output directory.
//!
//! Exit codes: 0 on success, 1 for configuration or validation problems
//! (including measurability collisions), 2 for runtime failures.

pub mod config;
mod experiments;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::model::validate_measurability;

pub use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "infoflow", version, about = "Information-based bond pricing with a random flow rate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate information paths, bond prices and volatility summaries.
    Simulate,
    /// Mean volatility and vol-of-vol, optionally over a sweep of flow-rate laws.
    Volatility,
    /// Expected Fisher information over a flow-rate × time grid.
    Fisher,
    /// Mutual information between the information process and the cash flow.
    MutualInfo,
    /// Call price by closed form and Monte Carlo.
    Price,
    /// Implied constant-flow-rate surface.
    Surface,
    /// True versus believed flow-rate pricing and conditional skewness.
    Manipulate,
    /// Check the model for measurability collisions.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Volatility => "volatility",
            Command::Fisher => "fisher",
            Command::MutualInfo => "mutual-info",
            Command::Price => "price",
            Command::Surface => "surface",
            Command::Manipulate => "manipulate",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the CSV files and manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Master seed, overriding `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths, overriding `mc.paths`.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Refuse models with measurability collisions.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    pub strict: bool,
}

/// Failure of a CLI run, classified by exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad config, bad arguments or a model rejected by validation.
    Invalid(String),
    /// Numerical or I/O failure while running.
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Invalid(_) => 1,
            RunError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid input: {m}"),
            RunError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel(_)
            | Error::InvalidSourceSpec(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::BadInterval { .. }
            | Error::TimeAtOrPastHorizon { .. }
            | Error::StrikeOutOfRange { .. }
            | Error::NonPositiveFlowRate(_)
            | Error::TargetOutOfRange { .. }
            | Error::TooFewPaths { .. } => RunError::Invalid(e.to_string()),
            Error::NegativeEffectiveRate(_)
            | Error::QuadratureFailure { .. }
            | Error::NoConvergence(_)
            | Error::Io(_)
            | Error::DegenerateSample => RunError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    command: &'a str,
    config_sha256: String,
    seed: u64,
    paths: usize,
    version: &'a str,
    started_unix_seconds: u64,
    wall_time_seconds: f64,
    outputs: Vec<String>,
}

/// Parses `args` (including the program name) and runs the experiment.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<(), RunError> {
    let started = Instant::now();
    let config_path = cli.common.config.as_deref().ok_or_else(|| RunError::Invalid("--config is required".into()))?;
    let raw =
        fs::read(config_path).map_err(|e| RunError::Invalid(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_slice(&raw).map_err(|e| RunError::Invalid(format!("config parse error: {e}")))?;
    if let Some(seed) = cli.common.seed {
        cfg.mc.seed = seed;
    }
    if let Some(paths) = cli.common.paths {
        cfg.mc.paths = paths;
    }

    let report = validate_measurability(&cfg.model);
    if cli.command == Command::Validate {
        return experiments::validate(&cfg, &report);
    }
    if !report.is_measurable && cli.common.strict {
        experiments::print_collisions(&report);
        return Err(RunError::Invalid(
            "model violates the measurability condition (use --strict false to override)".into(),
        ));
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(RunError::Invalid("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Runtime(e.to_string()))?;
    fs::create_dir_all(&cli.common.out_dir)
        .map_err(|e| RunError::Runtime(format!("cannot create {}: {e}", cli.common.out_dir.display())))?;
    let out = Output { dir: &cli.common.out_dir, prefix: &cfg.experiment };
    let outputs = pool.install(|| experiments::dispatch(cli.command, &cfg, &out))?;

    let manifest = Manifest {
        experiment: &cfg.experiment,
        command: cli.command.name(),
        config_sha256: hex::encode(Sha256::digest(&raw)),
        seed: cfg.mc.seed,
        paths: cfg.mc.paths,
        version: env!("CARGO_PKG_VERSION"),
        started_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Runtime(e.to_string()))?;
    fs::write(cli.common.out_dir.join("manifest.json"), text).map_err(|e| RunError::Runtime(e.to_string()))?;
    Ok(())
}

/// Output directory plus the experiment prefix used in file names.
pub(crate) struct Output<'a> {
    dir: &'a Path,
    prefix: &'a str,
}

impl Output<'_> {
    /// Creates `<prefix>_<name>.csv` and hands it to `write`.
    pub(crate) fn csv<F>(&self, name: &str, write: F) -> Result<String, RunError>
    where
        F: FnOnce(fs::File) -> crate::error::Result<()>,
    {
        let file_name = format!("{}_{name}.csv", self.prefix);
        let path = self.dir.join(&file_name);
        let file =
            fs::File::create(&path).map_err(|e| RunError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        write(file)?;
        Ok(file_name)
    }
}
