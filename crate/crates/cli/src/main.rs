//! Command-line driver for the borderline elliptic boundary laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod gridfile;
mod pipelines;

use config::{parse_config, presets_text, ExperimentConfig, Pipeline};

#[derive(Parser)]
#[command(
    name = "borderlab",
    version,
    about = "Finite-difference experiments on elliptic boundary regularity in convex domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipelines selected in a config file.
    Run {
        /// Path to a `key = value` experiment config.
        config: PathBuf,
        /// Run independent pipelines on separate threads.
        #[arg(long)]
        concurrent: bool,
    },
    /// List the available domains, operators, rhs presets and defaults.
    Presets,
    /// Classify the configured right-hand side against L(n,1).
    Audit {
        /// Path to a `key = value` experiment config.
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (path, cfg, concurrent, label) = match cli.command {
        Command::Presets => {
            print!("{}", presets_text());
            return ExitCode::SUCCESS;
        }
        Command::Run { config, concurrent } => match load(&config) {
            Ok(cfg) => (config, cfg, concurrent, "run"),
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        Command::Audit { config } => match load(&config) {
            Ok(mut cfg) => {
                cfg.pipelines = vec![Pipeline::LorentzAudit];
                (config, cfg, false, "audit")
            }
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
    };

    let command = format!("borderlab {label} {}", path.display());
    match pipelines::run_all(&cfg, &path, &command, concurrent) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
