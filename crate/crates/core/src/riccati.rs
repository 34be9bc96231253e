//! Riccati residuals and the damped fixed-point solver.
//!
//! The graph of `X: H₊ → H₋` reduces `B` iff `X` solves
//!
//! ```text
//! X·A₊ + A₋·X + X·Wᵀ·X − W = 0
//! ```
//!
//! or equivalently iff the skew generator `Y` solves
//! `A·Y − Y·A − Y·V·Y + V = 0`. Rearranging the block equation with
//! `F = I + A₊^{−1/2}·Xᵀ·W·A₊^{−1/2}` gives the fixed-point map
//!
//! ```text
//! G(X)ᵀ = A₊^{−1/2} · F⁻¹ · ((W − A₋·X)·A₊^{−1/2})ᵀ
//! ```
//!
//! which requires `A₊ ≻ 0`.

use ndarray::Array2;
use serde::Serialize;

use crate::blockform::SaddlePointMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, identity, spectral_norm, Matrix};
use crate::spectral::{spectral_split_relative, DEFAULT_ZERO_TOL_REL};
use crate::subspace::{angular_from_projector, graph_projector, AngularOperator};

/// Relative tolerance for the structural checks on `Y`.
const STRUCTURE_TOL: f64 = 1e-12;

/// Sign of the `A₋·X` term in the fixed-point map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CouplingSign {
    /// `W − A₋·X`, consistent with the block Riccati equation.
    #[default]
    Corrected,
    /// `W + A₋·X`. Does not reproduce the Riccati solution when `A₋ ≠ 0`;
    /// kept for fault injection.
    Printed,
}

fn check_angular_dims(b: &SaddlePointMatrix, x: &Matrix) -> Result<()> {
    let dec = b.dec();
    if x.dim() != (dec.dim_minus, dec.dim_plus) {
        return Err(Error::dimension(
            "angular operator",
            format!("{}x{}", dec.dim_minus, dec.dim_plus),
            format!("{}x{}", x.nrows(), x.ncols()),
        ));
    }
    Ok(())
}

/// `‖A·Y − Y·A − Y·V·Y + V‖` for a skew-symmetric off-diagonal `Y`.
pub fn riccati_residual_operator(b: &SaddlePointMatrix, y: &Matrix) -> Result<f64> {
    let dec = b.dec();
    if y.dim() != (dec.total(), dec.total()) {
        return Err(Error::dimension("skew generator", format!("{0}x{0}", dec.total()), format!("{}x{}", y.nrows(), y.ncols())));
    }
    let scale = STRUCTURE_TOL * spectral_norm(y).max(1.0);
    let skew = spectral_norm(&(y + &y.t()));
    if skew > scale {
        return Err(Error::Structure(format!("Y is not skew-symmetric: ‖Y + Yᵀ‖ = {skew:.3e}")));
    }
    let (d11, d22) = dec.diagonal_blocks(y);
    let diag = spectral_norm(&d11).max(spectral_norm(&d22));
    if diag > scale {
        return Err(Error::Structure(format!("Y is not off-diagonal: diagonal blocks have norm {diag:.3e}")));
    }
    let a = b.diagonal_part();
    let v = b.off_diagonal_part();
    let r = a.dot(y) - y.dot(&a) - y.dot(&v).dot(y) + &v;
    Ok(spectral_norm(&r))
}

/// Block form of the residual, `X·A₊ + A₋·X + X·Wᵀ·X − W`.
pub fn riccati_residual_matrix(b: &SaddlePointMatrix, x: &Matrix) -> Result<Matrix> {
    check_angular_dims(b, x)?;
    Ok(x.dot(b.a_plus()) + b.a_minus().dot(x) + x.dot(&b.w().t()).dot(x) - b.w())
}

/// `‖X·A₊ + A₋·X + X·Wᵀ·X − W‖`.
pub fn riccati_residual_angular(b: &SaddlePointMatrix, x: &Matrix) -> Result<f64> {
    Ok(spectral_norm(&riccati_residual_matrix(b, x)?))
}

/// `‖Q⊥·B·Q‖` for the graph projector `Q` of `X`; zero iff the graph reduces `B`.
pub fn graph_reduction_defect(b: &SaddlePointMatrix, x: &AngularOperator) -> Result<f64> {
    check_angular_dims(b, &x.x)?;
    let (q, q_perp) = graph_projector(x)?;
    Ok(spectral_norm(&q_perp.dot(b.full()).dot(&q)))
}

/// `A₊^{−1/2}`, refusing a singular `A₊`.
pub fn positive_block_inv_sqrt(b: &SaddlePointMatrix) -> Result<Matrix> {
    linalg::psd_inv_sqrt(b.a_plus()).map_err(|e| match e {
        Error::Singular { detail, .. } => Error::Singular {
            what: "aPlus".into(),
            detail: format!("the fixed-point map requires A₊ ≻ 0 ({detail})"),
        },
        other => other,
    })
}

/// One application of the fixed-point map `G`, given `A₊^{−1/2}`.
pub fn fixed_point_map(
    b: &SaddlePointMatrix,
    x: &Matrix,
    a_plus_inv_sqrt: &Matrix,
    sign: CouplingSign,
) -> Result<Matrix> {
    check_angular_dims(b, x)?;
    let s = a_plus_inv_sqrt;
    let p = b.dec().dim_plus;
    let f = identity(p) + s.dot(&x.t()).dot(b.w()).dot(s);
    let a_minus_x = b.a_minus().dot(x);
    let coupling = match sign {
        CouplingSign::Corrected => b.w() - &a_minus_x,
        CouplingSign::Printed => b.w() + &a_minus_x,
    };
    let rhs = s.dot(&coupling.t());
    let g_t = s.dot(&linalg::solve(&f, &rhs, "F = I + A₊^{-1/2}·Xᵀ·W·A₊^{-1/2}")?);
    Ok(g_t.reversed_axes().as_standard_layout().to_owned())
}

/// `‖G(X) − X‖`; vanishes at a Riccati solution for the corrected sign.
pub fn fixed_point_identity_defect(b: &SaddlePointMatrix, x: &Matrix, sign: CouplingSign) -> Result<f64> {
    let s = positive_block_inv_sqrt(b)?;
    Ok(spectral_norm(&(fixed_point_map(b, x, &s, sign)? - x)))
}

/// The angular operator of the spectral subspace `L₊`, used as the oracle.
pub fn spectral_angular_operator(b: &SaddlePointMatrix) -> Result<AngularOperator> {
    let split = spectral_split_relative(b, DEFAULT_ZERO_TOL_REL)?;
    angular_from_projector(&split.projector_plus(), b.dec())
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FixedPointOptions {
    /// `α ∈ (0, 1]` in `X ← (1 − α)·X + α·G(X)`.
    pub damping: f64,
    /// Convergence threshold relative to `‖B‖`, applied to the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub sign: CouplingSign,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, max_iter: 200, sign: CouplingSign::Corrected }
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiReport {
    pub solution: AngularOperator,
    /// Angular residual of every iterate, starting with `x0`.
    pub residual_history: Vec<f64>,
    /// `‖Xₖ − X_spectral‖` for every iterate.
    pub distance_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖X_final − X_spectral‖`.
    pub oracle_distance: f64,
    /// Absolute residual threshold `tol·‖B‖`.
    pub threshold: f64,
    pub abort_reason: Option<String>,
}

/// Damped fixed-point iteration for the block Riccati equation.
///
/// Convergence is declared on the residual. The iteration is experimental:
/// no global convergence is claimed, so the report always carries the
/// distance to the spectral solution.
pub fn fixed_point_solve(b: &SaddlePointMatrix, x0: &AngularOperator, opts: &FixedPointOptions) -> Result<RiccatiReport> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    check_angular_dims(b, &x0.x)?;
    let s = positive_block_inv_sqrt(b)?;
    let oracle = spectral_angular_operator(b)?;
    let threshold = opts.tol * b.norm();

    let mut x = x0.x.clone();
    let mut residual_history = Vec::new();
    let mut distance_history = Vec::new();
    let mut converged = false;
    let mut abort_reason = None;
    let mut iterations = 0;
    loop {
        let residual = riccati_residual_angular(b, &x)?;
        residual_history.push(residual);
        distance_history.push(spectral_norm(&(&x - &oracle.x)));
        if residual <= threshold {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        let g = match fixed_point_map(b, &x, &s, opts.sign) {
            Ok(g) => g,
            Err(e @ Error::Singular { .. }) => {
                abort_reason = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        x = &x * (1.0 - opts.damping) + &g * opts.damping;
        iterations += 1;
    }
    let oracle_distance = *distance_history.last().expect("history holds x0");
    Ok(RiccatiReport {
        solution: AngularOperator::new(x),
        residual_history,
        distance_history,
        iterations,
        converged,
        oracle_distance,
        threshold,
        abort_reason,
    })
}

/// Schatten `p`-norm `(Σ σₖᵖ)^{1/p}`; `p = ∞` gives the spectral norm.
pub fn schatten_norm(m: &Matrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("Schatten exponent must be ≥ 1, got {p}")));
    }
    let sigma = linalg::singular_values(m)?;
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    if p.is_infinite() {
        return Ok(top);
    }
    let sum: f64 = sigma.iter().map(|s| (s / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}

/// Least-squares slope of `log σₖ` against `log k` over the inclusive,
/// 1-based index range `k_range`.
pub fn decay_exponent(sigmas: &[f64], k_range: (usize, usize)) -> Result<f64> {
    let (lo, hi) = k_range;
    if lo == 0 || hi <= lo {
        return Err(Error::Fit(format!("index range [{lo}, {hi}] must satisfy 1 ≤ lo < hi")));
    }
    if hi > sigmas.len() {
        return Err(Error::Fit(format!("index range [{lo}, {hi}] exceeds the {} available values", sigmas.len())));
    }
    let points: Vec<(f64, f64)> = (lo..=hi)
        .map(|k| {
            let s = sigmas[k - 1];
            if s > 0.0 && s.is_finite() {
                Ok(((k as f64).ln(), s.ln()))
            } else {
                Err(Error::Fit(format!("value {s:e} at k = {k} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Zero angular operator shaped for `b`.
pub fn zero_start(b: &SaddlePointMatrix) -> AngularOperator {
    AngularOperator::new(Array2::zeros((b.dec().dim_minus, b.dec().dim_plus)))
}
