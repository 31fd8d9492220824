//! `posetfd`: selection on user data, simulation experiments, bound reports
//! and oracle verification.
//!
//! Every subcommand flag can also be given in a flat JSON object passed with
//! `--config`, under the flag's long name. Flags win over the file; the seed
//! falls back to `POSETFD_SEED` and then to 0.
//!
//! Exit codes: 0 success, 1 failure, 2 usage error.

mod experiment;
mod input;
mod select;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "POSETFD_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "posetfd",
    version,
    about = "False-discovery-controlled model selection over posets of models"
)]
struct Cli {
    /// JSON file of default flag values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed [env: POSETFD_SEED; default 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select a model from a data file
    Select(select::SelectArgs),
    /// Run a simulation design and write per-trial and summary tables
    Experiment(experiment::ExperimentArgs),
    /// Run oracle verification suites
    Verify(verify::VerifyArgs),
    /// Compute the false-discovery bound from a file of bag estimates
    BoundReport(select::BoundArgs),
}

/// A problem with how the program was invoked, as opposed to a failure
/// while running it.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Writes `text` to `path`, or to stdout when there is no path.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing --{name} (flag or config key {name:?})")))
}

/// Overlays the flags that were given onto the config entries.
fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Map<String, Value>) -> Result<T> {
    let mut merged = config;
    if let Value::Object(given) = serde_json::to_value(flags)? {
        for (k, v) in given {
            if !v.is_null() && v != Value::Bool(false) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
}

fn load_config(path: Option<&PathBuf>) -> Result<Map<String, Value>> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(usage(format!("config {} must hold a JSON object", path.display()))),
        Err(e) => Err(usage(format!("config {}: {e}", path.display()))),
    }
}

fn take<T: DeserializeOwned>(config: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    match config.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| usage(format!("config key {key:?}: {e}"))),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = load_config(cli.config.as_ref())?;
    let threads = cli.threads.or(take(&mut config, "threads")?);
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("{SEED_ENV}={s:?} is not a seed")))?,
        ),
        Err(_) => None,
    };
    let seed = cli.seed.or(take(&mut config, "seed")?).or(env_seed).unwrap_or(0);
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Select(a) => select::cmd_select(merge(a, config)?, seed),
        Command::Experiment(a) => experiment::cmd_experiment(merge(a, config)?, seed),
        Command::Verify(a) => verify::cmd_verify(merge(a, config)?, seed),
        Command::BoundReport(a) => select::cmd_bound_report(merge(a, config)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
