//! Command-line front end for the `faultyde` toolkit.

pub mod cache;
pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::{Cache, CACHE_ENV};
use crate::commands::{Context, Outcome, PegArgs, PiArgs};
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] faultyde::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// For errors raised inside library callbacks.
    pub(crate) fn into_core(self) -> faultyde::Error {
        match self {
            CliError::Core(e) => e,
            other => faultyde::Error::InvalidParameter(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "faultyde", version, about = "Noisy density evolution and faulty-decoder simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Results cache directory.
    #[arg(long, global = true, env = CACHE_ENV)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// JSON run config.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ε-threshold of the configured decoder.
    Threshold(ConfigArg),
    /// Density-evolution trace at every channel point.
    DeRun(ConfigArg),
    /// Finite-length BER prediction.
    FlBer(ConfigArg),
    /// Gallager B threshold rules compared.
    OptimizeGb(ConfigArg),
    /// Exhaustive Min-Sum parameter search.
    OptimizeMs(ConfigArg),
    /// Monte-Carlo BER of the faulty decoder.
    Simulate(ConfigArg),
    /// Progressive edge-growth construction written as alist.
    Peg {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        dv: Option<usize>,
        #[arg(long)]
        dc: Option<usize>,
        /// JSON file with `vn_edge` and `cn_edge` degree fractions.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Deviation transition matrix as CSV.
    InspectPi {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        eps01: f64,
        #[arg(long)]
        eps10: f64,
        #[arg(long)]
        balanced_zero: bool,
    },
    /// Re-runs the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Full resolved input: the run config, or the flag arguments.
    pub input: Value,
    pub config_hash: String,
    pub versions: Versions,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub flags: Vec<String>,
    pub cache_hits: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    pub faultyde: String,
    pub cli: String,
}

/// A resolved invocation, as stored in the manifest.
#[derive(Debug, Clone)]
pub enum Invocation {
    Config { command: String, config: RunConfig },
    Peg(PegArgs),
    InspectPi(PiArgs),
}

impl Invocation {
    pub fn command(&self) -> &str {
        match self {
            Invocation::Config { command, .. } => command,
            Invocation::Peg(_) => "peg",
            Invocation::InspectPi(_) => "inspect-pi",
        }
    }

    fn input(&self) -> Value {
        match self {
            Invocation::Config { config, .. } => serde_json::to_value(config).expect("serializable"),
            Invocation::Peg(a) => serde_json::to_value(a).expect("serializable"),
            Invocation::InspectPi(a) => serde_json::to_value(a).expect("serializable"),
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Invocation::Config { config, .. } => config.seed,
            Invocation::Peg(a) => a.seed,
            Invocation::InspectPi(_) => 0,
        }
    }

    pub fn from_manifest(m: &Manifest) -> CliResult<Self> {
        let err = |e: serde_json::Error| CliError::Config(format!("manifest input: {e}"));
        Ok(match m.command.as_str() {
            "peg" => Invocation::Peg(serde_json::from_value(m.input.clone()).map_err(err)?),
            "inspect-pi" => Invocation::InspectPi(serde_json::from_value(m.input.clone()).map_err(err)?),
            c => Invocation::Config {
                command: c.to_string(),
                config: serde_json::from_value(m.input.clone()).map_err(err)?,
            },
        })
    }
}

const DEFAULT_OUT: &str = "faultyde-out";

/// Resolves the parsed command line into an invocation.
pub fn resolve(cli: &Cli) -> CliResult<Invocation> {
    let with_seed = |mut c: RunConfig| {
        if let Some(s) = cli.global.seed {
            c.seed = s;
        }
        c
    };
    let config = |command: &str, a: &ConfigArg| -> CliResult<Invocation> {
        let cfg = with_seed(RunConfig::load(&a.config)?);
        cfg.task_for(command)?;
        Ok(Invocation::Config {
            command: command.to_string(),
            config: cfg,
        })
    };
    match &cli.command {
        Command::Threshold(a) => config("threshold", a),
        Command::DeRun(a) => config("de-run", a),
        Command::FlBer(a) => config("fl-ber", a),
        Command::OptimizeGb(a) => config("optimize-gb", a),
        Command::OptimizeMs(a) => config("optimize-ms", a),
        Command::Simulate(a) => config("simulate", a),
        Command::Peg { n, dv, dc, profile } => {
            let profile = match profile {
                Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            Ok(Invocation::Peg(PegArgs {
                n: *n,
                dv: *dv,
                dc: *dc,
                profile,
                seed: cli.global.seed.unwrap_or(0),
            }))
        }
        Command::InspectPi { q, eps01, eps10, balanced_zero } => Ok(Invocation::InspectPi(PiArgs {
            q: *q,
            eps01: *eps01,
            eps10: *eps10,
            zero_sign: if *balanced_zero {
                faultyde::deviations::ZeroSign::Balanced
            } else {
                faultyde::deviations::ZeroSign::Positive
            },
        })),
        Command::Replay { manifest } => {
            let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
            Invocation::from_manifest(&m)
        }
    }
}

/// Runs an invocation and writes its manifest.
pub fn execute(inv: &Invocation, out: &Path, cache_dir: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(out)?;
    let cache = Cache::open(cache_dir.to_path_buf())?;
    let ctx = Context { out, cache: &cache };
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let outcome: Outcome = match inv {
        Invocation::Config { command, config } => commands::run_config_command(command, config, &ctx)?,
        Invocation::Peg(a) => commands::peg(a, &ctx)?,
        Invocation::InspectPi(a) => commands::inspect_pi(a, &ctx)?,
    };
    let input = inv.input();
    let manifest = Manifest {
        command: inv.command().to_string(),
        config_hash: config::hash_json(&input.to_string()),
        input,
        versions: Versions {
            faultyde: faultyde_version(),
            cli: env!("CARGO_PKG_VERSION").to_string(),
        },
        seed: inv.seed(),
        workers: rayon::current_num_threads(),
        started_unix,
        wall_time_s: clock.elapsed().as_secs_f64(),
        outputs: outcome.outputs,
        flags: outcome.flags,
        cache_hits: outcome.cache_hits,
        summary: outcome.summary,
    };
    std::fs::write(out.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

fn faultyde_version() -> String {
    // the two crates are versioned together through the workspace
    env!("CARGO_PKG_VERSION").to_string()
}

/// Entry point shared by the binary: returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            log::warn!("worker pool already initialized: {e}");
        }
    }
    let result = resolve(&cli).and_then(|inv| {
        let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let cache_dir = Cache::resolve(cli.global.cache_dir.as_deref());
        let manifest = execute(&inv, &out, &cache_dir)?;
        if let Invocation::InspectPi(_) = inv {
            print!("{}", std::fs::read_to_string(out.join("pi.csv"))?);
        }
        Ok(manifest)
    });
    match result {
        Ok(m) if m.flags.is_empty() => 0,
        Ok(m) => {
            for f in &m.flags {
                eprintln!("flagged: {f}");
            }
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
