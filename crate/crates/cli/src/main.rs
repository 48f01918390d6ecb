//! `spvar <mode> --config <path> [--out <dir>]`
//!
//! Runs one experiment described by a TOML config. Exit status is zero iff
//! every solve converged and every hard invariant passed; failures are
//! printed as a machine-readable JSON list.

use clap::Parser;
use spvar::config::{parse_config, Mode};
use spvar::runner;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "spvar",
    about = "Grid-based variational experiments for nonlinear Schrödinger-Poisson systems"
)]
struct Cli {
    /// experiment mode: solve | sweep_mu | sweep_eps | diagnose | oracle | sobolev
    mode: String,
    /// path to the TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// override for output.directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let Some(mode) = Mode::from_str(&cli.mode) else {
        eprintln!(
            "unknown mode '{}'; expected solve | sweep_mu | sweep_eps | diagnose | oracle | sobolev",
            cli.mode
        );
        std::process::exit(2);
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", cli.config.display());
            std::process::exit(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    if cfg.mode != mode {
        eprintln!(
            "mode mismatch: command line says '{}', config says '{}'",
            mode.as_str(),
            cfg.mode.as_str()
        );
        std::process::exit(2);
    }
    if let Some(out) = cli.out {
        cfg.output.directory = out.display().to_string();
    }
    match runner::run_experiment(&cfg) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                eprintln!("wrote {}", a.display());
            }
            if outcome.failures.is_empty() {
                println!("{{\"status\": \"ok\", \"failures\": []}}");
            } else {
                let list: Vec<String> = outcome
                    .failures
                    .iter()
                    .map(|f| format!("\"{}\"", f.replace('\\', "\\\\").replace('"', "\\\"")))
                    .collect();
                println!(
                    "{{\"status\": \"failed\", \"failures\": [{}]}}",
                    list.join(", ")
                );
                std::process::exit(1);
            }
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            std::process::exit(2);
        }
    }
}
