mod commands;
mod problem;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use saddle_rotor::mtx::Storage;
use saddle_rotor::Error;
use serde_json::{json, Value};

use commands::{DiagonalizeArgs, Outcome, RiccatiArgs, StokesArgs, VerifyArgs};
use problem::InputError;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

/// Block diagonalization of saddle-point matrices by direct rotations.
///
/// Exit codes: 0 all checks passed, 2 invalid input, 3 numerical
/// classification failure, 4 invariant violation or non-convergence.
#[derive(Parser)]
#[command(name = "saddle-rotor", version)]
struct Cli {
    /// Omit wall-clock timings so reports are byte-identical across runs.
    #[arg(long, global = true)]
    no_timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MtxFormat {
    Array,
    Coordinate,
}

impl From<MtxFormat> for Storage {
    fn from(f: MtxFormat) -> Self {
        match f {
            MtxFormat::Array => Storage::Array,
            MtxFormat::Coordinate => Storage::Coordinate,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Spectral split, direct rotation and block diagonalization of a problem file.
    Diagonalize {
        /// Problem file (JSON).
        input: PathBuf,
        /// Structural tolerance relative to ‖B‖; overrides the problem file.
        #[arg(long)]
        tol: Option<f64>,
        /// Report destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the direct rotation U as Matrix Market.
        #[arg(long)]
        u_out: Option<PathBuf>,
        /// Write UᵀBU as Matrix Market.
        #[arg(long)]
        bhat_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "array")]
        mtx_format: MtxFormat,
    },
    /// Damped fixed-point iteration for the block Riccati equation.
    Riccati {
        /// Problem file (JSON).
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Convergence threshold on the residual, relative to ‖B‖.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Starting angular operator (Matrix Market); zero if omitted.
        #[arg(long)]
        x0: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration CSV: iter,residual,oracle_distance.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Finite-difference Stokes operator and its angle bounds.
    Stokes {
        /// Interior grid points per axis.
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        n: u32,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        vstar: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Spectra CSV: k,sigma_k,lambda_k.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Randomized invariant suite.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Largest total dimension of a random instance.
        #[arg(long, default_value_t = 40)]
        nmax: usize,
        /// Scale of the off-diagonal block.
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the uncorrected sign in the fixed-point map (fault injection).
        #[arg(long, hide = true)]
        inject_printed_sign: bool,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return EXIT_INPUT;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Dimension { .. }
            | Error::Asymmetric { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::InvalidArgument(_)
            | Error::MatrixMarket { .. }
            | Error::Io(_),
        ) => EXIT_INPUT,
        Some(_) => EXIT_NUMERICAL,
        None => EXIT_INPUT,
    }
}

fn write_report(mut report: Value, out: Option<&PathBuf>, elapsed_ms: Option<f64>) -> Result<()> {
    if let Some(ms) = elapsed_ms {
        report["timings"] = json!({ "totalMs": ms });
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let (outcome, out): (Outcome, Option<PathBuf>) = match cli.command {
        Command::Diagonalize { input, tol, out, u_out, bhat_out, mtx_format } => {
            let args = DiagonalizeArgs { input, tol, u_out, bhat_out, storage: mtx_format.into() };
            (commands::diagonalize(&args)?, out)
        }
        Command::Riccati { input, damping, max_iter, tol, x0, out, csv } => {
            let args = RiccatiArgs { input, damping, max_iter, tol, x0, csv };
            (commands::riccati(&args)?, out)
        }
        Command::Stokes { n, nu, vstar, out, csv } => {
            let args = StokesArgs { n: n as usize, nu, vstar, csv };
            (commands::stokes(&args)?, out)
        }
        Command::Verify { seed, cases, nmax, coupling, out, inject_printed_sign } => {
            let args = VerifyArgs { seed, cases, n_max: nmax, coupling, inject_printed_sign };
            (commands::verify(&args)?, out)
        }
    };
    let elapsed = (!cli.no_timings).then(|| start.elapsed().as_secs_f64() * 1e3);
    write_report(outcome.report, out.as_ref(), elapsed)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INVARIANT),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
