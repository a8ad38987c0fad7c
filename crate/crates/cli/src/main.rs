//! `matembed`: decide real and positive embeddability of a matrix read from
//! a JSON document, and print a JSON report.
//!
//! Exit codes: 0 embeddable, 1 not embeddable (or a failing `verify`),
//! 2 unreadable input or bad flags, 3 analysis error, 4 undecided.

mod commands;
mod document;
mod report;

use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{Exit, SampleOutcome};
use document::{MatrixDocument, ParseError, ToleranceOverrides};

#[derive(Parser)]
#[command(name = "matembed", version, about = "Real and positive semigroup embeddability of finite matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    tol: TolFlags,
}

#[derive(Args)]
struct TolFlags {
    /// Relative singular-value cut for rank decisions.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Eigenvalue clustering tolerance.
    #[arg(long, global = true)]
    eig_tol: Option<f64>,
    /// Bound on the relative residual of constructed objects.
    #[arg(long, global = true)]
    verify_tol: Option<f64>,
    /// Entries above this (relative) level count as nonzero.
    #[arg(long, global = true)]
    pos_tol: Option<f64>,
}

impl TolFlags {
    fn overrides(&self) -> ToleranceOverrides {
        ToleranceOverrides {
            rank_tol: self.rank_tol,
            eig_tol: self.eig_tol,
            verify_tol: self.verify_tol,
            pos_tol: self.pos_tol,
        }
    }
}

#[derive(Args)]
struct Input {
    /// Matrix document; standard input when omitted or `-`.
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether T = e^A for a real A, with a generator when it exists.
    CheckReal(Input),
    /// Decide whether T embeds into a positive semigroup.
    CheckPositive {
        #[command(flatten)]
        input: Input,
        /// Largest logarithm branch index tried by the Metzler search.
        #[arg(long, default_value_t = 2)]
        branch_bound: u32,
    },
    /// Real square root S = e^(A/2).
    SqrtReal(Input),
    /// Write e^(tA) on an equally spaced grid as CSV (`t,i,j,re,im`, zero-based indices).
    Sample {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        t_max: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Use a positive certificate instead of a real one.
        #[arg(long)]
        positive: bool,
        #[arg(long, default_value_t = 2)]
        branch_bound: u32,
    },
    /// Run the seeded property probes.
    Verify {
        #[arg(long, default_value_t = matembed_core::verify::DEFAULT_SEED)]
        seed: u64,
        /// Run a single probe.
        #[arg(long)]
        probe: Option<String>,
        /// Override the number of trials per probe.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn read_document(input: &Input, flags: &TolFlags) -> Result<(MatrixDocument, matembed_core::Tolerances), ParseError> {
    let text = match &input.input {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).map_err(|e| ParseError(format!("{}: {e}", p.display())))?
        }
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| ParseError(format!("standard input: {e}")))?;
            s
        }
    };
    let doc = MatrixDocument::parse(&text)?;
    let tol = doc.tolerances.clone().unwrap_or_default().layer(&flags.overrides()).resolve()?;
    Ok((doc, tol))
}

fn emit<T: Serialize>(value: &T, to_stderr: bool) {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    if to_stderr {
        let _ = writeln!(io::stderr(), "{text}");
    } else {
        let _ = writeln!(io::stdout(), "{text}");
    }
}

fn run(cli: Cli) -> Result<Exit, ParseError> {
    let exit = match &cli.command {
        Command::CheckReal(input) => {
            let (doc, tol) = read_document(input, &cli.tol)?;
            let (report, exit) = commands::check_real(&doc, &tol);
            emit(&report, false);
            exit
        }
        Command::CheckPositive { input, branch_bound } => {
            let (doc, tol) = read_document(input, &cli.tol)?;
            let (report, exit) = commands::check_positive(&doc, *branch_bound, &tol);
            emit(&report, false);
            exit
        }
        Command::SqrtReal(input) => {
            let (doc, tol) = read_document(input, &cli.tol)?;
            let (report, exit) = commands::sqrt_real(&doc, &tol);
            emit(&report, false);
            exit
        }
        Command::Sample { input, t_min, t_max, steps, positive, branch_bound } => {
            let grid = commands::sample_grid(*t_min, *t_max, *steps)?;
            let (doc, tol) = read_document(input, &cli.tol)?;
            match commands::sample(&doc, &grid, positive.then_some(*branch_bound), &tol) {
                SampleOutcome::Csv(csv) => {
                    let _ = io::stdout().write_all(csv.as_bytes());
                    Exit::Yes
                }
                SampleOutcome::Refused(report, exit) => {
                    emit(&report, true);
                    exit
                }
            }
        }
        Command::Verify { seed, probe, trials } => {
            let tol = cli.tol.overrides().resolve()?;
            let (doc, exit) = commands::verify(*seed, probe.as_deref(), *trials, &tol)?;
            emit(&doc, false);
            exit
        }
    };
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Parse as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("matembed: {e}");
            ExitCode::from(Exit::Parse as u8)
        }
    }
}
