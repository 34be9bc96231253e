use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use saddle_rotor::linalg::{self, spectral_norm};
use saddle_rotor::mtx::{read_matrix_market_file, write_matrix_market_file, Storage};
use saddle_rotor::riccati::{fixed_point_solve, riccati_residual_angular, zero_start, CouplingSign, FixedPointOptions};
use saddle_rotor::spectral::{kernel_split_check, spectral_split_relative, KernelSplitReport};
use saddle_rotor::stokes::{verify_bounds, StokesProblem};
use saddle_rotor::subspace::{
    angular_from_projector, block_diagonalize, direct_rotation_closed, direct_rotation_polar,
    AngularOperator, RotationDefects,
};
use saddle_rotor::verify::{run_suite, VerifyOptions, VerifySummary};
use saddle_rotor::{BlockDecomposition, Error, SaddlePointMatrix};
use serde::Serialize;
use serde_json::Value;

use crate::problem::{load_problem, InputError, Tolerances};

pub const MAX_N_VAR: &str = "SADDLE_ROTOR_MAX_N";
pub const DEFAULT_MAX_N: usize = 48;

/// Result of a command: the JSON report and whether every check passed.
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

pub fn max_n() -> Result<usize> {
    match std::env::var(MAX_N_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 2 => Ok(n),
            _ => bail!(InputError(format!("{MAX_N_VAR} must be an integer ≥ 2, got '{v}'"))),
        },
        Err(_) => Ok(DEFAULT_MAX_N),
    }
}

fn check_dimension(total: usize) -> Result<()> {
    let n = max_n()?;
    let limit = 3 * n * n;
    if total > limit {
        bail!(InputError(format!("problem dimension {total} exceeds 3·{MAX_N_VAR}² = {limit}")));
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Dims {
    plus: usize,
    minus: usize,
}

impl From<BlockDecomposition> for Dims {
    fn from(d: BlockDecomposition) -> Self {
        Self { plus: d.dim_plus, minus: d.dim_minus }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EigenvalueSummary {
    count: usize,
    min: f64,
    max: f64,
    positive: usize,
    negative: usize,
    zero: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DiagonalizeChecks {
    contraction: bool,
    kernel_split: bool,
    off_diagonal: bool,
    riccati: bool,
    rotation: bool,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DiagonalizeReport {
    command: &'static str,
    dims: Dims,
    norm: f64,
    tolerances: Tolerances,
    zero_tol: f64,
    eigenvalues: EigenvalueSummary,
    kernel_dims: (usize, usize),
    kernel_check: KernelSplitReport,
    norm_x: f64,
    max_angle: f64,
    projector_distance: f64,
    off_diag_residual: f64,
    riccati_residual: f64,
    rotation_defects: RotationDefects,
    /// `‖U_closed − U_polar‖`, or null when the polar route failed.
    rotation_cross_check: Option<f64>,
    checks: DiagonalizeChecks,
    passed: bool,
}

pub struct DiagonalizeArgs {
    pub input: PathBuf,
    pub tol: Option<f64>,
    pub u_out: Option<PathBuf>,
    pub bhat_out: Option<PathBuf>,
    pub storage: Storage,
}

pub fn diagonalize(args: &DiagonalizeArgs) -> Result<Outcome> {
    let (b, mut tolerances) = load_problem(&args.input)?;
    if let Some(tol) = args.tol {
        if !(tol > 0.0) {
            bail!(InputError(format!("--tol must be positive, got {tol}")));
        }
        tolerances.structural = tol;
    }
    let dec = b.dec();
    check_dimension(dec.total())?;
    let split = spectral_split_relative(&b, tolerances.zero_tol_rel)?;
    let b_norm = b.norm();
    let limit = tolerances.structural * b_norm;
    let q = split.projector_plus();
    let p = dec.plus_projector();
    let x = angular_from_projector(&q, dec)?;
    let rotation = direct_rotation_closed(&x)?;
    let rotation_cross_check = match direct_rotation_polar(&x) {
        Ok(polar) => Some(spectral_norm(&(&polar.u - &rotation.u))),
        Err(Error::Structure(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let rotation_defects = rotation.defects(dec)?;
    let diag = block_diagonalize(&b, &rotation.u)?;
    let riccati_residual = riccati_residual_angular(&b, &x.x)?;
    let max_angle = split.angles_to_plus(dec.dim_plus)?.iter().copied().fold(0.0, f64::max);
    let projector_distance = linalg::projector_distance(&q, &p);
    let kernel_check = kernel_split_check(&b, &split);

    let values = &split.eigenvalues;
    let eigenvalues = EigenvalueSummary {
        count: values.len(),
        min: values.first().copied().unwrap_or(0.0),
        max: values.last().copied().unwrap_or(0.0),
        positive: values.iter().filter(|&&l| l > split.zero_tol).count(),
        negative: values.iter().filter(|&&l| l < -split.zero_tol).count(),
        zero: values.iter().filter(|l| l.abs() <= split.zero_tol).count(),
    };
    let checks = DiagonalizeChecks {
        contraction: projector_distance <= FRAC_1_SQRT_2 + 1e-10,
        kernel_split: kernel_check.passed,
        off_diagonal: diag.off_diag_residual <= limit,
        riccati: riccati_residual <= limit,
        rotation: rotation_cross_check.is_some_and(|d| d <= 1e-10)
            && rotation_defects.orthogonality <= 1e-10
            && rotation_defects.diagonal_min_eig >= -1e-10,
    };
    let passed = checks.contraction && checks.kernel_split && checks.off_diagonal && checks.riccati && checks.rotation;

    if let Some(path) = &args.u_out {
        write_matrix_market_file(path, &rotation.u, args.storage).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.bhat_out {
        write_matrix_market_file(path, &diag.bhat, args.storage).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = DiagonalizeReport {
        command: "diagonalize",
        dims: dec.into(),
        norm: b_norm,
        tolerances,
        zero_tol: split.zero_tol,
        eigenvalues,
        kernel_dims: split.kernel_dims(),
        kernel_check,
        norm_x: x.norm_x,
        max_angle,
        projector_distance,
        off_diag_residual: diag.off_diag_residual,
        riccati_residual,
        rotation_defects,
        rotation_cross_check,
        checks,
        passed,
    };
    eprintln!(
        "diagonalize: {} (normX = {:.6e}, offDiagResidual = {:.3e}, kernelDims = {:?})",
        if passed { "passed" } else { "FAILED" },
        report.norm_x,
        report.off_diag_residual,
        report.kernel_dims
    );
    Ok(Outcome { report: serde_json::to_value(&report)?, passed })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RiccatiCliReport {
    command: &'static str,
    dims: Dims,
    norm: f64,
    options: FixedPointOptions,
    x0: Option<String>,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    threshold: f64,
    oracle_distance: f64,
    norm_x: f64,
    abort_reason: Option<String>,
    passed: bool,
}

pub struct RiccatiArgs {
    pub input: PathBuf,
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub x0: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn load_start(path: &Path, b: &SaddlePointMatrix) -> Result<AngularOperator> {
    let x = read_matrix_market_file(path).with_context(|| format!("reading {}", path.display()))?;
    let dec = b.dec();
    if x.dim() != (dec.dim_minus, dec.dim_plus) {
        bail!(InputError(format!(
            "--x0 must be {}x{}, got {}x{}",
            dec.dim_minus,
            dec.dim_plus,
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(AngularOperator::new(x))
}

pub fn riccati(args: &RiccatiArgs) -> Result<Outcome> {
    let (b, _) = load_problem(&args.input)?;
    check_dimension(b.dec().total())?;
    let x0 = match &args.x0 {
        Some(path) => load_start(path, &b)?,
        None => zero_start(&b),
    };
    let opts = FixedPointOptions {
        damping: args.damping,
        tol: args.tol,
        max_iter: args.max_iter,
        sign: CouplingSign::Corrected,
    };
    let result = fixed_point_solve(&b, &x0, &opts)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["iter", "residual", "oracle_distance"])?;
        for (k, (r, d)) in result.residual_history.iter().zip(&result.distance_history).enumerate() {
            w.write_record([k.to_string(), format!("{r:e}"), format!("{d:e}")])?;
        }
        w.flush()?;
    }
    let report = RiccatiCliReport {
        command: "riccati",
        dims: b.dec().into(),
        norm: b.norm(),
        options: opts,
        x0: args.x0.as_ref().map(|p| p.display().to_string()),
        converged: result.converged,
        iterations: result.iterations,
        final_residual: *result.residual_history.last().expect("history holds x0"),
        threshold: result.threshold,
        oracle_distance: result.oracle_distance,
        norm_x: result.solution.norm_x,
        abort_reason: result.abort_reason.clone(),
        passed: result.converged,
    };
    eprintln!(
        "riccati: {} after {} iterations (residual = {:.3e}, oracle distance = {:.3e})",
        if result.converged { "converged" } else { "did NOT converge" },
        report.iterations,
        report.final_residual,
        report.oracle_distance
    );
    if let Some(reason) = &report.abort_reason {
        eprintln!("riccati: aborted: {reason}");
    }
    Ok(Outcome { report: serde_json::to_value(&report)?, passed: result.converged })
}

pub struct StokesArgs {
    pub n: usize,
    pub nu: f64,
    pub vstar: f64,
    pub csv: Option<PathBuf>,
}

pub fn stokes(args: &StokesArgs) -> Result<Outcome> {
    let limit = max_n()?;
    if args.n > limit {
        bail!(InputError(format!("--n {} exceeds {MAX_N_VAR} = {limit}", args.n)));
    }
    let prob = StokesProblem::new(args.n, args.nu, args.vstar).map_err(|e| InputError(e.to_string()))?;
    let report = verify_bounds(&prob)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["k", "sigma_k", "lambda_k"])?;
        let rows = report.singular_values.len().max(report.laplacian_eigenvalues.len());
        let cell = |v: Option<&f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for k in 0..rows {
            w.write_record([
                (k + 1).to_string(),
                cell(report.singular_values.get(k)),
                cell(report.laplacian_eigenvalues.get(k)),
            ])?;
        }
        w.flush()?;
    }
    eprintln!(
        "stokes: {} (Re* = {:.6}, normX = {:.6e}, bound = {:.6e}, kernelDims = {:?})",
        if report.passed { "passed" } else { "FAILED" },
        report.re_star,
        report.norm_x,
        report.bound,
        report.kernel_dims
    );
    for failure in report.failures() {
        eprintln!("stokes: {failure}");
    }
    let mut value = serde_json::to_value(&report)?;
    value["command"] = Value::from("stokes");
    Ok(Outcome { report: value, passed: report.passed })
}

pub struct VerifyArgs {
    pub seed: u64,
    pub cases: usize,
    pub n_max: usize,
    pub coupling: f64,
    pub inject_printed_sign: bool,
}

fn print_tallies(summary: &VerifySummary) {
    eprintln!("{:<20} {:>7} {:>7}  worst", "invariant", "passed", "failed");
    for t in &summary.tallies {
        let worst = t.worst.map_or("-".to_string(), |w| format!("{w:.3e}"));
        eprintln!("{:<20} {:>7} {:>7}  {worst}", t.invariant.name(), t.passed, t.failed);
    }
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    if args.n_max < 4 {
        bail!(InputError(format!("--nmax must be at least 4, got {}", args.n_max)));
    }
    check_dimension(args.n_max)?;
    if !(args.coupling >= 0.0 && args.coupling.is_finite()) {
        bail!(InputError(format!("--coupling must be nonnegative, got {}", args.coupling)));
    }
    if args.cases == 0 {
        eprintln!("warning: --cases 0 runs no checks; the suite passes vacuously");
    }
    let opts = VerifyOptions {
        seed: args.seed,
        cases: args.cases,
        n_max: args.n_max,
        coupling: args.coupling,
        sign: if args.inject_printed_sign { CouplingSign::Printed } else { CouplingSign::Corrected },
    };
    let summary = run_suite(&opts);
    print_tallies(&summary);
    let mut value = serde_json::to_value(&summary)?;
    value["command"] = Value::from("verify");
    Ok(Outcome { report: value, passed: summary.all_passed })
}
