//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure (error findings, aborted
//! episodes, gradient mismatches, invalid inputs), 2 usage error, 3 IO or
//! parse error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assurance::{
    build_ledger_template, check_ledger_against, evidence_report, ledger_to_json, load_argument,
    load_ledger, render_report, validate_argument, ComplianceSchema, Severity,
};
use crate::barrier::gradient_check_suite;
use crate::error::{Error, Result};
use crate::harness::{
    compute_metrics, read_trace, run_batch, run_episode, write_trace, ScenarioConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "asif-rta",
    version,
    about = "Safety-filter simulation and assurance-case tooling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trace and metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Metrics JSON destination; printed to stdout when omitted.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run seeded episodes in parallel and write aggregate metrics.
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed_base: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute safety metrics of a trace file.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic barrier gradients with central differences.
    CheckGradients {
        #[arg(long, default_value_t = 100)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Parse and validate an argument, optionally with its ledger.
    CheckCase {
        #[arg(long)]
        argument: PathBuf,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Evidence ledger commands.
    Ledger {
        #[command(subcommand)]
        command: LedgerCommand,
    },
    /// Compliance report for an argument and its ledger.
    Report {
        #[arg(long)]
        argument: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Write the evidence ledger template with every slot missing.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_FINDINGS,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Parses `argv` (program name first) and runs the command.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate {
            config,
            trace,
            metrics,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let t = run_episode(&cfg)?;
            write_trace(&t, &trace)?;
            if let Some(reason) = &t.aborted {
                eprintln!("episode aborted: {reason}");
            }
            match compute_metrics(&t) {
                Ok(m) => write_out(metrics.as_deref(), &to_json(&m))?,
                Err(e) => eprintln!("no metrics: {e}"),
            }
            Ok(if t.aborted.is_some() {
                EXIT_FINDINGS
            } else {
                EXIT_OK
            })
        }
        Command::Batch {
            config,
            episodes,
            seed_base,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let summary = run_batch(&cfg, episodes, seed_base)?;
            write_out(out.as_deref(), &to_json(&summary))?;
            Ok(EXIT_OK)
        }
        Command::Metrics { trace, out } => {
            let m = compute_metrics(&read_trace(&trace)?)?;
            write_out(out.as_deref(), &to_json(&m))?;
            Ok(EXIT_OK)
        }
        Command::CheckGradients {
            states,
            seed,
            step,
            tolerance,
        } => {
            let checks = gradient_check_suite(states, seed, step)?;
            let mut worst: f64 = 0.0;
            for c in &checks {
                println!(
                    "{}: {} states, max relative error {:e}",
                    c.constraint, c.states, c.max_rel_error
                );
                worst = worst.max(c.max_rel_error);
            }
            println!("max relative error {worst:e} (tolerance {tolerance:e})");
            Ok(if worst <= tolerance {
                EXIT_OK
            } else {
                EXIT_FINDINGS
            })
        }
        Command::CheckCase { argument, ledger } => {
            let arg = load_argument(&argument)?;
            let findings = validate_argument(&arg);
            for f in &findings {
                println!("{f}");
            }
            let errors = findings
                .iter()
                .filter(|f| f.severity == Severity::Error)
                .count();
            println!(
                "{} nodes, root {}: {errors} errors, {} warnings",
                arg.nodes.len(),
                arg.root,
                findings.len() - errors
            );
            let mut code = if errors > 0 { EXIT_FINDINGS } else { EXIT_OK };
            if let Some(path) = ledger {
                let items = load_ledger(&path)?;
                match check_ledger_against(&items, &arg) {
                    Ok(()) => {
                        println!("ledger: {} items consistent with the argument", items.len())
                    }
                    Err(e) => {
                        println!("error[ledger] {e}");
                        code = EXIT_FINDINGS;
                    }
                }
            }
            Ok(code)
        }
        Command::Ledger {
            command: LedgerCommand::Init { out },
        } => {
            let items = build_ledger_template();
            write_out(Some(&out), &ledger_to_json(&items))?;
            println!("wrote {} evidence slots to {}", items.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Report {
            argument,
            ledger,
            out,
        } => {
            let arg = load_argument(&argument)?;
            let errors: Vec<_> = validate_argument(&arg)
                .into_iter()
                .filter(|f| f.severity == Severity::Error)
                .collect();
            if !errors.is_empty() {
                for f in &errors {
                    eprintln!("{f}");
                }
                return Ok(EXIT_FINDINGS);
            }
            let items = load_ledger(&ledger)?;
            let report = evidence_report(&arg, &ComplianceSchema::default(), &items)?;
            write_out(out.as_deref(), &render_report(&report))?;
            Ok(EXIT_OK)
        }
    }
}
