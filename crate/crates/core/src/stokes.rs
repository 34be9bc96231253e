//! Finite-difference block Stokes operator on the unit square.
//!
//! Velocity and pressure share the `n × n` interior grid with mesh width
//! `h = 1/(n+1)`, indexed `j·n + i` with `i` running along `x`. The pressure
//! gradient uses centered differences with reflected ghost values, so it
//! annihilates constants exactly and the kernel of the assembled operator is
//! the constant-pressure line.

use std::f64::consts::PI;

use ndarray::linalg::kron;
use ndarray::{concatenate, Array2, Axis};
use serde::Serialize;

use crate::blockform::SaddlePointMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, identity, Matrix};
use crate::riccati::decay_exponent;
use crate::spectral::{kernel_split_check, spectral_split_relative, KernelSplitReport};
use crate::subspace::{angular_from_projector, AngularOperator};

/// Kernel classification threshold relative to `‖B‖`.
pub const STOKES_ZERO_TOL_REL: f64 = 1e-10;

/// Slack for the bound comparisons.
pub const BOUND_TOL: f64 = 1e-8;

/// Index range for the singular value decay fit.
pub const SV_FIT_RANGE: (usize, usize) = (5, 50);

/// Required decay exponent of `σₖ(X)`.
pub const SV_SLOPE_MAX: f64 = -0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StokesProblem {
    pub n: usize,
    pub nu: f64,
    pub vstar: f64,
}

impl StokesProblem {
    pub fn new(n: usize, nu: f64, vstar: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid size n must be at least 2, got {n}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive and finite, got {nu}")));
        }
        if !(vstar >= 0.0 && vstar.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling v* must be nonnegative and finite, got {vstar}")));
        }
        Ok(Self { n, nu, vstar })
    }

    pub fn h(&self) -> f64 {
        mesh_width(self.n)
    }

    pub fn velocity_dim(&self) -> usize {
        2 * self.n * self.n
    }

    pub fn pressure_dim(&self) -> usize {
        self.n * self.n
    }
}

fn mesh_width(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid size n must be at least 2, got {n}")));
    }
    Ok(())
}

fn laplacian_1d(n: usize) -> Matrix {
    let h2 = mesh_width(n).powi(2);
    Array2::from_shape_fn((n, n), |(i, j)| match i.abs_diff(j) {
        0 => 2.0 / h2,
        1 => -1.0 / h2,
        _ => 0.0,
    })
}

/// Centered difference with reflected ghosts `p₀ = p₁`, `p_{n+1} = p_n`.
fn centered_difference_1d(n: usize) -> Matrix {
    let c = 0.5 / mesh_width(n);
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        d[[i, (i + 1).min(n - 1)]] += c;
        d[[i, i.saturating_sub(1)]] -= c;
    }
    d
}

/// Five-point Dirichlet Laplacian on the interior nodes, `n² × n²`.
pub fn dirichlet_laplacian_2d(n: usize) -> Result<Matrix> {
    check_grid(n)?;
    let t = laplacian_1d(n);
    let i = identity(n);
    Ok(kron(&i, &t) + kron(&t, &i))
}

/// Smallest eigenvalue of the discrete Laplacian, `(8/h²)·sin²(πh/2)`.
pub fn discrete_lambda1(n: usize) -> f64 {
    let h = mesh_width(n);
    8.0 / (h * h) * (PI * h / 2.0).sin().powi(2)
}

/// All eigenvalues `(4/h²)(sin²(kπh/2) + sin²(lπh/2))`, ascending.
pub fn laplacian_eigenvalues_closed_form(n: usize) -> Vec<f64> {
    let h = mesh_width(n);
    let s: Vec<f64> = (1..=n).map(|k| 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2)).collect();
    let mut all: Vec<f64> = s.iter().flat_map(|a| s.iter().map(move |b| a + b)).collect();
    all.sort_by(f64::total_cmp);
    all
}

/// Discrete gradient `[Gx; Gy]`, `2n² × n²`. The divergence is `−Gᵀ`.
pub fn gradient_matrix(n: usize) -> Result<Matrix> {
    check_grid(n)?;
    let d = centered_difference_1d(n);
    let i = identity(n);
    let gx = kron(&i, &d);
    let gy = kron(&d, &i);
    Ok(concatenate(Axis(0), &[gx.view(), gy.view()]).expect("column counts agree"))
}

/// `A₊ = ν·(I₂ ⊗ L)`, `A₋ = 0`, `W = v*·Gᵀ`.
pub fn assemble_stokes(prob: &StokesProblem) -> Result<SaddlePointMatrix> {
    let l = dirichlet_laplacian_2d(prob.n)? * prob.nu;
    let a_plus = kron(&identity(2), &l);
    let a_minus = Array2::zeros((prob.pressure_dim(), prob.pressure_dim()));
    let w = gradient_matrix(prob.n)?.reversed_axes().as_standard_layout().to_owned() * prob.vstar;
    SaddlePointMatrix::assemble(a_plus, a_minus, w)
}

/// `Re* = 2v*/(ν·√λ₁)`.
pub fn reynolds_number(nu: f64, vstar: f64, lambda1: f64) -> f64 {
    2.0 * vstar / (nu * lambda1.sqrt())
}

/// `tan(½·arctan Re*)`.
pub fn angle_bound(re_star: f64) -> f64 {
    (0.5 * re_star.atan()).tan()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StokesReport {
    pub n: usize,
    pub h: f64,
    pub nu: f64,
    pub vstar: f64,
    /// Smallest eigenvalue of the discrete scalar Laplacian, computed.
    pub lambda1: f64,
    pub lambda1_closed_form: f64,
    pub lambda1_continuum: f64,
    pub re_star: f64,
    pub bound: f64,
    /// `Re*` and bound with the continuum `λ₁ = 2π²`; reported only.
    pub re_star_continuum: f64,
    pub bound_continuum: f64,
    pub norm_x: f64,
    pub max_angle: f64,
    pub tan2_theta: f64,
    pub projector_distance: f64,
    /// `sin(arctan bound)`, the projector distance implied by the bound.
    pub projector_distance_bound: f64,
    pub zero_tol: f64,
    pub kernel_dims: (usize, usize),
    pub kernel_check: KernelSplitReport,
    /// Fitted decay exponent of `σₖ(X)` over `SV_FIT_RANGE`, if defined.
    pub sv_slope: Option<f64>,
    pub norm_x_ok: bool,
    pub angle_ok: bool,
    pub projector_ok: bool,
    pub kernel_ok: bool,
    pub passed: bool,
    #[serde(skip)]
    pub singular_values: Vec<f64>,
    #[serde(skip)]
    pub laplacian_eigenvalues: Vec<f64>,
}

impl StokesReport {
    /// Human-readable descriptions of every failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.norm_x_ok {
            out.push(format!("‖X‖ = {:.6e} exceeds tan(½ arctan Re*) = {:.6e}", self.norm_x, self.bound));
        }
        if !self.angle_ok {
            out.push(format!("tan(2‖Θ‖) = {:.6e} exceeds Re* = {:.6e}", self.tan2_theta, self.re_star));
        }
        if !self.projector_ok {
            out.push(format!(
                "‖Q − P‖ = {:.6e} exceeds min(√2/2, sin(arctan bound)) = {:.6e}",
                self.projector_distance,
                self.projector_distance_bound.min(std::f64::consts::FRAC_1_SQRT_2)
            ));
        }
        if !self.kernel_ok {
            out.push(format!("kernel dims {:?} unexpected or the kernel split check failed", self.kernel_dims));
        }
        out
    }
}

/// `(0, 1)`: only constant pressures, unless `v* = 0` decouples the whole
/// pressure space.
pub fn expected_kernel_dims(prob: &StokesProblem) -> (usize, usize) {
    if prob.vstar > 0.0 {
        (0, 1)
    } else {
        (0, prob.pressure_dim())
    }
}

/// Angular operator of the positive spectral subspace with the kernel split
/// at `STOKES_ZERO_TOL_REL·‖B‖`.
pub fn stokes_angular_operator(b: &SaddlePointMatrix) -> Result<AngularOperator> {
    let split = spectral_split_relative(b, STOKES_ZERO_TOL_REL)?;
    angular_from_projector(&split.projector_plus(), b.dec())
}

fn fit_if_defined(sigmas: &[f64], range: (usize, usize)) -> Option<f64> {
    if sigmas.len() < range.1 || sigmas[..range.1].iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    decay_exponent(sigmas, range).ok()
}

/// Runs the full pipeline and checks the angle bounds and the kernel.
pub fn verify_bounds(prob: &StokesProblem) -> Result<StokesReport> {
    let b = assemble_stokes(prob)?;
    let dec = b.dec();
    let split = spectral_split_relative(&b, STOKES_ZERO_TOL_REL)?;
    let zero_tol = split.zero_tol;
    let kernel_check = kernel_split_check(&b, &split);
    let kernel_dims = split.kernel_dims();

    let q = split.projector_plus();
    let p = dec.plus_projector();
    let x = angular_from_projector(&q, dec)?;
    let max_angle = split.angles_to_plus(dec.dim_plus)?.iter().copied().fold(0.0, f64::max);
    let tan2_theta = if 2.0 * max_angle >= PI / 2.0 { f64::INFINITY } else { (2.0 * max_angle).tan() };
    let projector_distance = linalg::projector_distance(&q, &p);

    let laplacian_eigenvalues = linalg::eigvalsh(&dirichlet_laplacian_2d(prob.n)?)?.to_vec();
    let lambda1 = laplacian_eigenvalues[0];
    let lambda1_continuum = 2.0 * PI * PI;
    let re_star = reynolds_number(prob.nu, prob.vstar, lambda1);
    let bound = angle_bound(re_star);
    let re_star_continuum = reynolds_number(prob.nu, prob.vstar, lambda1_continuum);
    let projector_distance_bound = bound.atan().sin();

    let singular_values = linalg::singular_values(&x.x)?.to_vec();
    let sv_slope = fit_if_defined(&singular_values, SV_FIT_RANGE);

    let norm_x_ok = x.norm_x <= bound + BOUND_TOL;
    let angle_ok = tan2_theta <= re_star + BOUND_TOL;
    let projector_ok = projector_distance <= std::f64::consts::FRAC_1_SQRT_2 + BOUND_TOL
        && projector_distance <= projector_distance_bound + BOUND_TOL;
    let kernel_ok = kernel_dims == expected_kernel_dims(prob) && kernel_check.passed;
    Ok(StokesReport {
        n: prob.n,
        h: prob.h(),
        nu: prob.nu,
        vstar: prob.vstar,
        lambda1,
        lambda1_closed_form: discrete_lambda1(prob.n),
        lambda1_continuum,
        re_star,
        bound,
        re_star_continuum,
        bound_continuum: angle_bound(re_star_continuum),
        norm_x: x.norm_x,
        max_angle,
        tan2_theta,
        projector_distance,
        projector_distance_bound,
        zero_tol,
        kernel_dims,
        kernel_check,
        sv_slope,
        norm_x_ok,
        angle_ok,
        projector_ok,
        kernel_ok,
        passed: norm_x_ok && angle_ok && projector_ok && kernel_ok,
        singular_values,
        laplacian_eigenvalues,
    })
}

/// Decay exponent of `σₖ(X)` over the inclusive 1-based range `k_range`.
pub fn decay_analysis(prob: &StokesProblem, k_range: (usize, usize)) -> Result<f64> {
    let x = stokes_angular_operator(&assemble_stokes(prob)?)?;
    decay_exponent(&linalg::singular_values(&x.x)?.to_vec(), k_range)
}

/// Growth exponent of `λₖ` of the discrete Laplacian; about 1 in two dimensions.
pub fn laplacian_weyl_slope(n: usize, k_range: (usize, usize)) -> Result<f64> {
    let eigenvalues = linalg::eigvalsh(&dirichlet_laplacian_2d(n)?)?.to_vec();
    decay_exponent(&eigenvalues, k_range)
}

/// `‖X‖` for each coupling in `vstars` at fixed `n` and `ν`.
pub fn coupling_sweep(n: usize, nu: f64, vstars: &[f64]) -> Result<Vec<f64>> {
    vstars
        .iter()
        .map(|&v| {
            let prob = StokesProblem::new(n, nu, v)?;
            Ok(stokes_angular_operator(&assemble_stokes(&prob)?)?.norm_x)
        })
        .collect()
}
