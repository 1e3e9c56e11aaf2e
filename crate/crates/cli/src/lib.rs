//! Argument parsing and configuration layering for the `aeroswarm` binary.
//!
//! Settings are applied in order: built-in defaults, `--config` file,
//! `AEROSWARM_*` environment variables, then command-line flags.
//! `AEROSWARM_WORLD__N_UAVS=6` sets `world.n_uavs`; a double underscore
//! separates path segments.

use std::path::PathBuf;

use aeroswarm_core::experiment::{run_eval, run_sweep, run_train, RunOptions};
use aeroswarm_core::{Result, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

pub const ENV_PREFIX: &str = "AEROSWARM_";

#[derive(Debug, Parser)]
#[command(name = "aeroswarm", version, about = "Multi-UAV coverage simulator and trainer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the shared policy and log all three policies per episode.
    Train(RunArgs),
    /// Greedy rollouts of a trained checkpoint.
    Eval(RunArgs),
    /// Train once per user count in `experiment.sweep_users`.
    Sweep(RunArgs),
    /// Print the default configuration as TOML.
    DumpDefaults,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "runs/latest")]
    pub out: PathBuf,
    /// Episodes to run along the phase schedule (default: whole schedule).
    #[arg(long)]
    pub episodes: Option<u64>,
    /// Also write a per-step trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Resume point for `train`, weights for `eval`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Maps `AEROSWARM_A__B=v` to `("a.b", "v")`. Other variables are skipped.
pub fn env_overrides<I>(vars: I) -> Vec<(String, String)>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            (!rest.is_empty()).then(|| (rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    // deterministic regardless of environment ordering
    out.sort();
    out
}

pub fn resolve_config<I>(args: &RunArgs, vars: I) -> Result<ScenarioConfig>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    for (path, value) in env_overrides(vars) {
        cfg.set_path(&path, &value)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(args: &RunArgs) -> RunOptions {
    RunOptions {
        episodes: args.episodes,
        trace: args.trace,
        checkpoint: args.checkpoint.clone(),
    }
}

/// Runs one parsed command and returns what should be printed on success.
pub fn execute<I>(cli: &Cli, vars: I) -> Result<String>
where
    I: IntoIterator<Item = (String, String)>,
{
    match &cli.command {
        Command::DumpDefaults => ScenarioConfig::default().to_toml_string(),
        Command::Train(a) => {
            let cfg = resolve_config(a, vars)?;
            let s = run_train(&cfg, &a.out, &options(a))?;
            Ok(format!("trained {} episodes, results in {}", s.records.len() / 3, s.out_dir.display()))
        }
        Command::Eval(a) => {
            let cfg = resolve_config(a, vars)?;
            let s = run_eval(&cfg, &a.out, &options(a))?;
            Ok(format!("evaluated {} episodes, results in {}", s.records.len() / 3, s.out_dir.display()))
        }
        Command::Sweep(a) => {
            let cfg = resolve_config(a, vars)?;
            let res = run_sweep(&cfg, &a.out, &options(a))?;
            Ok(format!("swept {} user counts, results in {}", res.len(), a.out.display()))
        }
    }
}
