//! Spectral splitting of a saddle-point matrix into the semidefinite
//! reducing subspaces
//!
//! ```text
//! L₊ = ran E_B((0, ∞)) ⊕ (Ker B ∩ H₊),   L₋ = ran E_B((−∞, 0)) ⊕ (Ker B ∩ H₋)
//! ```
//!
//! together with the kernel splitting `Ker B = (Ker B ∩ H₊) ⊕ (Ker B ∩ H₋)`
//! and the regularized projections `E_{B + J/n}((0, ∞))`.

use ndarray::{concatenate, s, Array1, Axis};
use serde::Serialize;

use crate::blockform::SaddlePointMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, projector_from_basis, spectral_norm, Matrix};

/// Default zero threshold relative to `‖B‖`.
pub const DEFAULT_ZERO_TOL_REL: f64 = 1e-8;

/// Eigenvalues with `zero_tol < |λ| ≤ AMBIGUITY_FACTOR·zero_tol` are refused.
pub const AMBIGUITY_FACTOR: f64 = 10.0;

pub fn default_zero_tol(b: &SaddlePointMatrix) -> f64 {
    DEFAULT_ZERO_TOL_REL * b.norm()
}

/// Orthonormal bases of `L₊`, `L₋` and the two kernel components.
///
/// Eigenvalues with `|λ| ≤ zero_tol` are counted as kernel; classification at
/// exactly `±zero_tol` is a numerical convention.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub basis_plus: Matrix,
    pub basis_minus: Matrix,
    pub kernel_plus: Matrix,
    pub kernel_minus: Matrix,
    pub eigenvalues: Array1<f64>,
    pub zero_tol: f64,
    /// Eigenvalues of the compression of `P_{H₊}` to `Ker B`; each lies in
    /// `{0, 1}` exactly when the kernel splits.
    pub kernel_block_weights: Array1<f64>,
}

impl SpectralSplit {
    pub fn dim_plus(&self) -> usize {
        self.basis_plus.ncols()
    }

    pub fn dim_minus(&self) -> usize {
        self.basis_minus.ncols()
    }

    pub fn kernel_dims(&self) -> (usize, usize) {
        (self.kernel_plus.ncols(), self.kernel_minus.ncols())
    }

    /// Orthogonal projector `Q` onto `L₊`.
    pub fn projector_plus(&self) -> Matrix {
        linalg::symmetrize(&projector_from_basis(&self.basis_plus))
    }

    pub fn projector_minus(&self) -> Matrix {
        linalg::symmetrize(&projector_from_basis(&self.basis_minus))
    }

    /// Principal angles between `H₊` (the first `dim_plus` coordinates) and
    /// `L₊`, ascending. The sines are the singular values of the `H₊` rows of
    /// a basis of `L₋`, so small angles keep full accuracy.
    pub fn angles_to_plus(&self, dim_plus: usize) -> Result<Array1<f64>> {
        let complement = concatenate(Axis(1), &[self.basis_minus.view(), self.kernel_minus.view()])
            .expect("row counts agree");
        let sines = linalg::singular_values(&complement.slice(s![..dim_plus, ..]).to_owned())?;
        let mut angles = vec![0.0; dim_plus];
        for (slot, sigma) in angles.iter_mut().rev().zip(sines.iter()) {
            *slot = sigma.clamp(0.0, 1.0).asin();
        }
        Ok(Array1::from(angles))
    }

    /// `‖Q·B − B·Q‖` for the projector onto `L₊`.
    pub fn reduction_defect(&self, b: &SaddlePointMatrix) -> f64 {
        let q = self.projector_plus();
        spectral_norm(&(q.dot(b.full()) - b.full().dot(&q)))
    }

    /// `(min eig of B on L₊, max eig of B on L₋)`.
    pub fn semidefiniteness(&self, b: &SaddlePointMatrix) -> Result<(f64, f64)> {
        let compress = |basis: &Matrix| -> Result<Array1<f64>> {
            if basis.ncols() == 0 {
                return Ok(Array1::zeros(0));
            }
            linalg::eigvalsh(&linalg::symmetrize(&basis.t().dot(b.full()).dot(basis)))
        };
        let plus = compress(&self.basis_plus)?;
        let minus = compress(&self.basis_minus)?;
        Ok((
            plus.iter().copied().fold(f64::INFINITY, f64::min),
            minus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ))
    }
}

fn check_ambiguity(values: &Array1<f64>, zero_tol: f64) -> Result<()> {
    let upper = AMBIGUITY_FACTOR * zero_tol;
    if let Some(&value) = values.iter().find(|v| v.abs() > zero_tol && v.abs() <= upper) {
        return Err(Error::AmbiguousEigenvalue { value, zero_tol, upper });
    }
    Ok(())
}

/// Computes `L₊`, `L₋` and the kernel components of `B`.
pub fn spectral_split(b: &SaddlePointMatrix, zero_tol: f64) -> Result<SpectralSplit> {
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("zero tolerance must be non-negative, got {zero_tol}")));
    }
    split_from_eig(b, linalg::eigh(b.full())?, zero_tol)
}

/// As [`spectral_split`] with `zero_tol = rel·‖B‖`, reusing the eigenvalues
/// for `‖B‖`.
pub fn spectral_split_relative(b: &SaddlePointMatrix, rel: f64) -> Result<SpectralSplit> {
    if !(rel >= 0.0) {
        return Err(Error::InvalidArgument(format!("relative zero tolerance must be non-negative, got {rel}")));
    }
    let eig = linalg::eigh(b.full())?;
    b.seed_norm(eig.abs_max());
    let zero_tol = rel * b.norm();
    split_from_eig(b, eig, zero_tol)
}

fn split_from_eig(b: &SaddlePointMatrix, eig: linalg::EigDecomposition, zero_tol: f64) -> Result<SpectralSplit> {
    check_ambiguity(&eig.values, zero_tol)?;
    let positive = eig.select_vectors(|l| l > zero_tol);
    let negative = eig.select_vectors(|l| l < -zero_tol);
    let kernel = eig.select_vectors(|l| l.abs() <= zero_tol);

    // Rotate the kernel basis into coordinate-block form: eigenvectors of the
    // compression of P_{H₊} to Ker B with weight 1 lie in H₊, weight 0 in H₋.
    let p = b.dec().dim_plus;
    let top = kernel.slice(s![..p, ..]).to_owned();
    let compression = linalg::symmetrize(&top.t().dot(&top));
    let weights_eig = linalg::eigh(&compression)?;
    let rotated = kernel.dot(&weights_eig.vectors);
    let plus_idx: Vec<usize> = (0..weights_eig.dim()).filter(|&i| weights_eig.values[i] > 0.5).collect();
    let minus_idx: Vec<usize> = (0..weights_eig.dim()).filter(|&i| weights_eig.values[i] <= 0.5).collect();
    let kernel_plus = rotated.select(Axis(1), &plus_idx);
    let kernel_minus = rotated.select(Axis(1), &minus_idx);

    let basis_plus = concatenate(Axis(1), &[positive.view(), kernel_plus.view()]).expect("row counts agree");
    let basis_minus = concatenate(Axis(1), &[negative.view(), kernel_minus.view()]).expect("row counts agree");
    Ok(SpectralSplit {
        basis_plus,
        basis_minus,
        kernel_plus,
        kernel_minus,
        eigenvalues: eig.values,
        zero_tol,
        kernel_block_weights: weights_eig.values,
    })
}

/// Outcome of the kernel-splitting verification.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelSplitReport {
    pub dim_kernel: usize,
    pub dim_kernel_plus: usize,
    pub dim_kernel_minus: usize,
    /// Largest `H₋` component of a vector in the `H₊` kernel basis.
    pub max_leak_plus: f64,
    /// Largest `H₊` component of a vector in the `H₋` kernel basis.
    pub max_leak_minus: f64,
    /// Largest distance of a kernel block weight from `{0, 1}`.
    pub max_weight_mixing: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl KernelSplitReport {
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::KernelSplit(format!(
                "dim Ker B = {}, split ({}, {}), leaks ({:.3e}, {:.3e}), mixing {:.3e}, tolerance {:.3e}",
                self.dim_kernel,
                self.dim_kernel_plus,
                self.dim_kernel_minus,
                self.max_leak_plus,
                self.max_leak_minus,
                self.max_weight_mixing,
                self.tolerance
            )))
        }
    }
}

fn max_column_norm(m: &ndarray::ArrayView2<f64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max)
}

/// Verifies `Ker B = (Ker B ∩ H₊) ⊕ (Ker B ∩ H₋)` on a computed split.
pub fn kernel_split_check(b: &SaddlePointMatrix, split: &SpectralSplit) -> KernelSplitReport {
    let p = b.dec().dim_plus;
    let dim_kernel = split.eigenvalues.iter().filter(|l| l.abs() <= split.zero_tol).count();
    let (dim_kernel_plus, dim_kernel_minus) = split.kernel_dims();
    let max_leak_plus = max_column_norm(&split.kernel_plus.slice(s![p.., ..]));
    let max_leak_minus = max_column_norm(&split.kernel_minus.slice(s![..p, ..]));
    let max_weight_mixing = split
        .kernel_block_weights
        .iter()
        .map(|w| w.abs().min((1.0 - w).abs()))
        .fold(0.0, f64::max);
    let tolerance = split.zero_tol;
    let passed = dim_kernel == dim_kernel_plus + dim_kernel_minus
        && max_leak_plus <= tolerance
        && max_leak_minus <= tolerance
        && max_weight_mixing <= tolerance;
    KernelSplitReport {
        dim_kernel,
        dim_kernel_plus,
        dim_kernel_minus,
        max_leak_plus,
        max_leak_minus,
        max_weight_mixing,
        tolerance,
        passed,
    }
}

/// Kernel components computed from the blocks alone:
/// `Ker B ∩ H₊ = Null(A₊) ∩ Null(W)` and `Ker B ∩ H₋ = Null(A₋) ∩ Null(Wᵀ)`,
/// embedded into `H = H₊ ⊕ H₋`.
pub fn kernel_characterization(b: &SaddlePointMatrix, zero_tol: f64) -> Result<(Matrix, Matrix)> {
    let dec = b.dec();
    let plus_stack = concatenate(Axis(0), &[b.a_plus().view(), b.w().view()]).expect("column counts agree");
    let wt = b.w().t().to_owned();
    let minus_stack = concatenate(Axis(0), &[b.a_minus().view(), wt.view()]).expect("column counts agree");
    let null_plus = linalg::null_space(&plus_stack, zero_tol)?;
    let null_minus = linalg::null_space(&minus_stack, zero_tol)?;

    let mut plus = Matrix::zeros((dec.total(), null_plus.ncols()));
    plus.slice_mut(s![..dec.dim_plus, ..]).assign(&null_plus);
    let mut minus = Matrix::zeros((dec.total(), null_minus.ncols()));
    minus.slice_mut(s![dec.dim_plus.., ..]).assign(&null_minus);
    Ok((plus, minus))
}

/// `E_{B + J/n}((0, ∞))`, the positive spectral projector of the regularized
/// matrix `Bₙ = B + J/n`.
pub fn regularized_projection(b: &SaddlePointMatrix, n: f64, zero_tol: f64) -> Result<Matrix> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("regularization parameter must be positive, got {n}")));
    }
    let mut bn = b.full().clone();
    let dec = b.dec();
    for i in 0..dec.total() {
        bn[[i, i]] += if i < dec.dim_plus { 1.0 / n } else { -1.0 / n };
    }
    let eig = linalg::eigh(&bn)?;
    if let Some(&value) = eig.values.iter().find(|l| l.abs() <= zero_tol) {
        return Err(Error::AmbiguousEigenvalue { value, zero_tol, upper: zero_tol });
    }
    Ok(linalg::symmetrize(&projector_from_basis(&eig.select_vectors(|l| l > 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::subspace_distance;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn canonical() -> SaddlePointMatrix {
        SaddlePointMatrix::assemble(array![[1.0]], array![[1.0]], array![[1.0]]).unwrap()
    }

    fn kernel_example() -> SaddlePointMatrix {
        SaddlePointMatrix::assemble(Array2::from_diag(&array![0.0, 1.0]), array![[0.0]], array![[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn canonical_split() {
        let b = canonical();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(split.eigenvalues, array![-r2, r2], epsilon = 1e-14);
        let expected = array![[1.0 + r2], [1.0]];
        let expected = &expected / (expected.iter().map(|x| x * x).sum::<f64>().sqrt());
        assert!(subspace_distance(&split.basis_plus, &expected) < 1e-14);
        assert!(split.reduction_defect(&b) < 1e-14);
        let angles = split.angles_to_plus(1).unwrap();
        assert_abs_diff_eq!(angles[0], std::f64::consts::PI / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn decoupled_angles_are_exactly_zero() {
        let b = SaddlePointMatrix::assemble(Array2::eye(3), Array2::eye(2), Array2::zeros((2, 3))).unwrap();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        assert_eq!(split.angles_to_plus(3).unwrap(), array![0.0, 0.0, 0.0]);
    }

    #[test]
    fn decoupled_split_is_coordinate_split() {
        let b = SaddlePointMatrix::assemble(array![[1.0]], array![[1.0]], array![[0.0]]).unwrap();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        assert_abs_diff_eq!(split.projector_plus(), b.dec().plus_projector(), epsilon = 1e-15);
    }

    #[test]
    fn kernel_in_positive_block() {
        let b = kernel_example();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        assert_eq!(split.kernel_dims(), (1, 0));
        assert_eq!(split.dim_plus(), 2);
        assert!(subspace_distance(&split.kernel_plus, &array![[1.0], [0.0], [0.0]]) < 1e-14);
        let report = kernel_split_check(&b, &split);
        assert!(report.passed, "{report:?}");
        assert_eq!((report.dim_kernel, report.dim_kernel_plus, report.dim_kernel_minus), (1, 1, 0));
    }

    #[test]
    fn kernel_in_negative_block() {
        let b = SaddlePointMatrix::assemble(array![[1.0]], array![[0.0]], array![[0.0]]).unwrap();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        let report = kernel_split_check(&b, &split);
        assert!(report.passed);
        assert_eq!((report.dim_kernel_plus, report.dim_kernel_minus), (0, 1));
    }

    #[test]
    fn kernel_free_split() {
        let b = canonical();
        let split = spectral_split(&b, default_zero_tol(&b)).unwrap();
        let report = kernel_split_check(&b, &split);
        assert!(report.passed);
        assert_eq!(report.dim_kernel, 0);
    }

    #[test]
    fn ambiguous_eigenvalue_is_refused() {
        let b = SaddlePointMatrix::assemble(array![[1.0]], array![[5e-8]], array![[0.0]]).unwrap();
        let err = spectral_split(&b, 1e-8).unwrap_err();
        assert!(matches!(err, Error::AmbiguousEigenvalue { value, .. } if (value + 5e-8).abs() < 1e-20));
    }

    #[test]
    fn kernel_characterization_matches_split() {
        let b = kernel_example();
        let zt = default_zero_tol(&b);
        let (plus, minus) = kernel_characterization(&b, zt).unwrap();
        assert_eq!((plus.ncols(), minus.ncols()), (1, 0));
        let split = spectral_split(&b, zt).unwrap();
        assert!(subspace_distance(&plus, &split.kernel_plus) < 1e-12);

        let definite = canonical();
        let (plus, minus) = kernel_characterization(&definite, default_zero_tol(&definite)).unwrap();
        assert_eq!((plus.ncols(), minus.ncols()), (0, 0));
    }

    #[test]
    fn regularized_projection_canonical() {
        let b = canonical();
        let zt = default_zero_tol(&b);
        let e1 = regularized_projection(&b, 1.0, zt).unwrap();
        let e = spectral_split(&b, zt).unwrap().projector_plus();
        // B₁ = [[2,1],[1,−2]] has angular operator √5 − 2.
        let expected = (std::f64::consts::PI / 8.0 - (5f64.sqrt() - 2.0).atan()).sin();
        assert_abs_diff_eq!(linalg::projector_distance(&e1, &e), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.160, epsilon = 5e-4);
    }

    #[test]
    fn regularized_projection_is_constant_when_decoupled() {
        let b = SaddlePointMatrix::assemble(array![[2.0]], array![[3.0]], array![[0.0]]).unwrap();
        let p = b.dec().plus_projector();
        for n in [1.0, 10.0, 1e3] {
            let e = regularized_projection(&b, n, default_zero_tol(&b)).unwrap();
            assert_abs_diff_eq!(e, p, epsilon = 1e-15);
        }
        assert!(regularized_projection(&b, 0.0, 0.0).is_err());
    }

    #[test]
    fn regularized_projection_converges() {
        let b = SaddlePointMatrix::assemble(
            array![[2.0, 0.5], [0.5, 1.0]],
            array![[1.5]],
            array![[0.7, -0.3]],
        )
        .unwrap();
        let zt = default_zero_tol(&b);
        let e = spectral_split(&b, zt).unwrap().projector_plus();
        let d = regularized_projection(&b, 1e8, zt).unwrap();
        assert!(linalg::projector_distance(&d, &e) <= 1e-6);
    }
}
