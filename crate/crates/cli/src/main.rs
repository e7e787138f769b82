//! `qbm`: runs entropy-production experiments for two oscillators in local
//! thermal baths from a JSON configuration.

mod config;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{Overrides, RunConfig, EXPERIMENTS};
use crate::error::CliError;
use crate::output::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "qbm", version, about = "Entropy production of two oscillators in local baths")]
struct Cli {
    /// Worker threads for parallel realisations (default: all cores).
    #[arg(long, global = true, env = "QBM_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    ///
    /// Flags take precedence over the config file, which takes precedence over defaults.
    Run {
        config: PathBuf,
        /// Overrides `seed` (sweep only).
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `grid.n_points`.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// List experiment kinds and their fields.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("worker count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
    }
    match cli.command {
        Command::Run { config, seed, out, points } => cmd_run(&config, &Overrides { seed, out, points }),
        Command::Validate { config } => cmd_validate(&config),
        Command::List => {
            for (kind, required, optional) in EXPERIMENTS {
                println!("{kind:<20} required: {required:<28} optional: {optional}");
            }
            Ok(())
        }
    }
}

fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(path, &Overrides::default())?;
    let report = json!({ "status": "ok", "experiment": cfg.experiment.kind(), "warnings": cfg.warnings() });
    println!("{report}");
    Ok(())
}

fn cmd_run(path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let cfg = RunConfig::load(path, overrides)?;
    let warnings = cfg.warnings();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let artifacts = run::execute(&cfg.experiment)?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::with_capacity(artifacts.files.len());
    for (name, contents) in &artifacts.files {
        write_atomic(dir, name, contents)?;
        files.push(name.clone());
    }
    let manifest = json!({
        "tool": "qbm",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.experiment,
        "files": files,
        "warnings": warnings,
        "notes": artifacts.notes,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(dir, e))? + "\n";
    write_atomic(dir, "manifest.json", &text)?;
    println!("{}: wrote {} files to {}", cfg.experiment.kind(), files.len() + 1, dir.display());
    Ok(())
}
