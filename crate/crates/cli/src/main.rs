mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;

/// Exit statuses.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_INVALID_RUN: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or missing configuration, manifests, or input files.
    #[error("configuration error: {0}")]
    Config(String),
    /// The run finished but its results are not certified.
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::InvalidRun(_) => EXIT_INVALID_RUN,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "grain", version, about = "Reflective-oracle search and multi-agent learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oracle level: the search target for build-oracle, the evaluation level for eval.
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seed list: `a..b` or comma separated.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Node budget of the oracle search.
    #[arg(long)]
    budget: Option<u64>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search for a partial-oracle chain and write its trace.
    BuildOracle(Common),
    /// Evaluate a machine against the traced oracle at one level.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        machine: Option<usize>,
        /// Input bits, `ε` or empty for the empty string.
        #[arg(long)]
        input: Option<String>,
    },
    /// Play one seeded game and log trajectory, gaps and posteriors.
    RunGame(Common),
    /// Run a named experiment over a seed list and aggregate.
    Experiment(Common),
    /// Print the first queries of the enumeration.
    EnumerateQueries {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
    },
}

fn effective_config(c: &Common, extra: &[(&str, Option<String>)]) -> Result<Config, CliError> {
    let mut cfg = Config::load(c.config.as_deref())?;
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE: {kv}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    let flags = [
        ("seed", c.seed.map(|x| x.to_string())),
        ("seeds", c.seeds.clone()),
        ("budget", c.budget.map(|x| x.to_string())),
        ("out_dir", c.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flags.into_iter().chain(extra.iter().map(|(k, v)| (*k, v.clone()))) {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    // A flag's path is relative to the working directory, not the config file.
    if let Some(p) = &c.out_dir {
        cfg.set_out_dir(p.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::BuildOracle(c) => {
            let cfg = effective_config(&c, &[("max_level", c.level.map(|x| x.to_string()))])?;
            commands::build_oracle(&cfg)
        }
        Command::Eval { common, machine, input } => {
            let cfg = effective_config(
                &common,
                &[
                    ("max_level", common.level.map(|x| x.to_string())),
                    ("machine", machine.map(|x| x.to_string())),
                    ("input", input),
                ],
            )?;
            commands::eval(&cfg)
        }
        Command::RunGame(c) => commands::run_game(&effective_config(&c, &[])?),
        Command::Experiment(c) => commands::experiment(&effective_config(&c, &[])?),
        Command::EnumerateQueries { common, count } => {
            let count = count.or(common.level.map(|k| k as usize)).map(|n| n.to_string());
            commands::enumerate_queries(&effective_config(&common, &[("count", count)])?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("grain: {e}");
            ExitCode::from(e.code())
        }
    }
}
