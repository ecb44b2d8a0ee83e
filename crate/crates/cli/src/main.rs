#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! `psslab`: build pseudosupersymmetric realizations from a JSON config and
//! certify them numerically.
//!
//! Exit codes: 0 when every check passes, 1 on a numeric failure, 2 on a
//! configuration or I/O error.

mod commands;
mod config;
mod realize;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::JobConfig;
use crate::realize::Job;

#[derive(Parser)]
#[command(
    name = "psslab",
    version,
    about = "Pseudosupersymmetric QM verification workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the defining relations of the configured realization.
    Verify(Common),
    /// Diagonalize the Hamiltonian and cluster its levels.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Write the level table as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Compare against the closed-form spectrum of a bosonized realization.
        #[arg(long)]
        closed_form: bool,
    },
    /// Block-diagonalize a deformed-oscillator realization and verify each component.
    Reduce(Common),
    /// Build the orthosupersymmetric realization and test its embedding.
    Ossqm(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Fock-space truncation, overriding the config.
    #[arg(long, value_name = "K")]
    dim: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Residual budget base, overriding the config.
    #[arg(long, value_name = "R")]
    budget: Option<f64>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PSSLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("PSSLAB_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("PSSLAB_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn write_report(outcome: &Outcome, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, &outcome.text)
            .with_context(|| format!("cannot write report {}", path.display()))?,
        None => std::io::stdout()
            .lock()
            .write_all(outcome.text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (common, csv) = match &cli.command {
        Command::Verify(c) | Command::Reduce(c) | Command::Ossqm(c) => (c, None),
        Command::Spectrum { common, csv, .. } => (common, csv.as_ref()),
    };
    let cfg = JobConfig::load(&common.config)?;
    let job = Job::new(cfg, common.dim, common.budget)?;
    let outcome = match &cli.command {
        Command::Verify(_) => commands::verify(&job)?,
        Command::Spectrum { closed_form, .. } => commands::spectrum(&job, *closed_form)?,
        Command::Reduce(_) => commands::reduce(&job)?,
        Command::Ossqm(_) => commands::ossqm(&job)?,
    };
    if let Some(path) = csv {
        let report = outcome
            .spectrum
            .as_ref()
            .context("--csv needs a level table; this realization has none")?;
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        report.write_csv(file)?;
    }
    write_report(&outcome, common.out.as_ref())?;
    eprintln!(
        "{}: {} ({})",
        job.cfg.realization,
        if outcome.pass { "PASS" } else { "FAIL" },
        commands::summary(&outcome.json),
    );
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
