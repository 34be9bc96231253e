//! Dense linear-algebra kernel.
//!
//! Symmetric eigendecompositions go through LAPACK `dsyevd` (divide and
//! conquer); singular values and LU solves go through `ndarray-linalg`.
//! Everything else (PSD matrix functions, polar factors, norms) is built on
//! top of the symmetric eigensolver.

use std::os::raw::{c_char, c_int};

use ndarray::{s, Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};

/// Dense real matrix. All operators in this crate are finite matrices.
pub type Matrix = Array2<f64>;

/// Relative tolerance on `‖S − Sᵀ‖_F / ‖S‖_F` accepted by [`eigh`].
pub const SYM_TOL: f64 = 1e-12;

/// Relative floor on the smallest eigenvalue accepted by [`psd_inv_sqrt`].
pub const PSD_TOL: f64 = 1e-12;

/// Reciprocal-condition floor below which LU solves are refused.
pub const RCOND_MIN: f64 = 1e-14;

/// Eigenvalues in ascending order with an orthonormal set of eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Array1<f64>,
    pub vectors: Matrix,
}

impl EigDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (mut col, &lambda) in scaled.columns_mut().into_iter().zip(self.values.iter()) {
            col *= f(lambda);
        }
        scaled.dot(&self.vectors.t())
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map_values(|x| x)
    }

    /// Largest eigenvalue magnitude, i.e. the spectral norm of the matrix.
    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Columns of the eigenvector matrix whose eigenvalues satisfy `keep`.
    pub fn select_vectors(&self, keep: impl Fn(f64) -> bool) -> Matrix {
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| keep(self.values[i])).collect();
        self.vectors.select(ndarray::Axis(1), &idx)
    }
}

pub fn frobenius(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> Matrix {
    Array2::eye(n)
}

pub fn ensure_square(m: &Matrix, context: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::dimension(context, "square matrix", format!("{r}x{c}")));
    }
    Ok(r)
}

pub fn ensure_finite(m: &Matrix, context: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{context} contains non-finite entries")))
    }
}

/// `‖S − Sᵀ‖_F`.
pub fn symmetry_defect(m: &Matrix) -> f64 {
    frobenius(&(m - &m.t()).view())
}

/// `(S + Sᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + &m.t()) * 0.5
}

/// Verifies the relative symmetry bound and returns the symmetrized matrix.
pub fn checked_symmetric(m: &Matrix, block: &str) -> Result<Matrix> {
    ensure_square(m, block)?;
    ensure_finite(m, block)?;
    let defect = symmetry_defect(m);
    let tol = SYM_TOL * frobenius(&m.view());
    if defect > tol {
        return Err(Error::Asymmetric { block: block.to_string(), defect, tol });
    }
    Ok(symmetrize(m))
}

fn dsyevd(mut data: Vec<f64>, n: usize, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let jobz: c_char = if want_vectors { b'V' } else { b'N' } as c_char;
    let uplo: c_char = b'L' as c_char;
    let n_i = lapack_dim(n)?;
    let lda = n_i.max(1);
    let mut w = vec![0.0; n];
    let mut info: c_int = 0;
    let mut work_query = [0.0_f64];
    let mut iwork_query = [0 as c_int];
    let query: c_int = -1;
    // SAFETY: all pointers reference live buffers of the sizes LAPACK expects;
    // the workspace query writes one element into each query buffer.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            data.as_mut_ptr(),
            &lda,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &query,
            iwork_query.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    let lwork = (work_query[0] as c_int).max(1);
    let liwork = iwork_query[0].max(1);
    let mut work = vec![0.0; lwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];
    // SAFETY: buffers sized according to the workspace query above.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            data.as_mut_ptr(),
            &lda,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    Ok((w, data))
}

fn symmetric_input(s: &Matrix) -> Result<(usize, Vec<f64>)> {
    let sym = checked_symmetric(s, "eigensolver input")?;
    let n = sym.nrows();
    // Symmetric, so the row-major buffer is also the column-major buffer.
    let data = sym.as_standard_layout().iter().copied().collect();
    Ok((n, data))
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn eigh(s: &Matrix) -> Result<EigDecomposition> {
    let (n, data) = symmetric_input(s)?;
    if n == 0 {
        return Ok(EigDecomposition { values: Array1::zeros(0), vectors: Array2::zeros((0, 0)) });
    }
    let (w, v) = dsyevd(data, n, true)?;
    let vectors = Array2::from_shape_vec((n, n).f(), v)
        .expect("LAPACK returns an n-by-n eigenvector matrix")
        .as_standard_layout()
        .to_owned();
    Ok(EigDecomposition { values: Array1::from(w), vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(s: &Matrix) -> Result<Array1<f64>> {
    let (n, data) = symmetric_input(s)?;
    if n == 0 {
        return Ok(Array1::zeros(0));
    }
    let (w, _) = dsyevd(data, n, false)?;
    Ok(Array1::from(w))
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &Matrix) -> Result<Array1<f64>> {
    ensure_finite(m, "singular value input")?;
    if m.is_empty() {
        return Ok(Array1::zeros(m.nrows().min(m.ncols())));
    }
    // Degenerate views can carry zero strides that LAPACK wrappers reject.
    let dense = Matrix::from_shape_vec(m.dim(), m.iter().copied().collect()).expect("shape matches");
    let (_, sigma, _) = dense.svddc(JobSvd::None).map_err(|e| lapack_error("dgesdd", e))?;
    Ok(sigma)
}

fn lapack_error(routine: &'static str, e: ndarray_linalg::error::LinalgError) -> Error {
    Error::Backend { routine, detail: e.to_string() }
}

/// Largest singular value. Symmetric input goes through the eigensolver.
///
/// Returns NaN when the input is not finite.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (r, c) = m.dim();
    if r == c && symmetry_defect(m) == 0.0 {
        if let Ok(values) = eigvalsh(m) {
            return values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        }
    }
    match singular_values(m) {
        Ok(sigma) => sigma[0],
        Err(_) => f64::NAN,
    }
}

/// Distance between two subspaces measured as `‖P − Q‖` of their projectors.
pub fn projector_distance(p: &Matrix, q: &Matrix) -> f64 {
    spectral_norm(&symmetrize(&(p - q)))
}

/// Orthogonal projector `B·Bᵀ` onto the span of orthonormal columns `B`.
pub fn projector_from_basis(basis: &Matrix) -> Matrix {
    basis.dot(&basis.t())
}

/// Principal square root of a symmetric PSD matrix. Eigenvalues down to
/// `−PSD_TOL·‖S‖` are treated as zero; anything more negative is rejected.
pub fn psd_sqrt(s: &Matrix) -> Result<Matrix> {
    let eig = eigh(s)?;
    let tol = PSD_TOL * eig.abs_max();
    if eig.min_value() < -tol {
        return Err(Error::NotPositiveSemidefinite {
            block: "psd_sqrt input".into(),
            min_eig: eig.min_value(),
            tol: -tol,
        });
    }
    Ok(eig.map_values(|x| x.max(0.0).sqrt()))
}

/// Inverse principal square root of a symmetric positive definite matrix.
///
/// Refuses (rather than regularizes) when the smallest eigenvalue is below
/// `PSD_TOL·‖S‖`.
pub fn psd_inv_sqrt(s: &Matrix) -> Result<Matrix> {
    let eig = eigh(s)?;
    inv_sqrt_from_eig(&eig, "psd_inv_sqrt input")
}

pub(crate) fn inv_sqrt_from_eig(eig: &EigDecomposition, what: &str) -> Result<Matrix> {
    let tol = PSD_TOL * eig.abs_max();
    let min = eig.min_value();
    if eig.dim() > 0 && (min < tol || min <= 0.0) {
        return Err(Error::Singular {
            what: what.to_string(),
            detail: format!("smallest eigenvalue {min:.3e} below {tol:.3e}"),
        });
    }
    Ok(eig.map_values(|x| 1.0 / x.sqrt()))
}

/// Relative floor on `σ_min / σ_max` accepted by [`polar_orthogonal`].
pub const POLAR_TOL: f64 = 1e-12;

/// Orthogonal factor `U = M·(MᵀM)^{−1/2}` of the polar decomposition of an
/// invertible square matrix, evaluated as `W·Vᵀ` from the SVD `M = W·Σ·Vᵀ`.
pub fn polar_orthogonal(m: &Matrix) -> Result<Matrix> {
    let n = ensure_square(m, "polar decomposition input")?;
    ensure_finite(m, "polar decomposition input")?;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let (w, sigma, vt) = m.svddc(JobSvd::All).map_err(|e| lapack_error("dgesdd", e))?;
    let (w, vt) = (w.expect("requested left vectors"), vt.expect("requested right vectors"));
    let (smax, smin) = (sigma[0], sigma[n - 1]);
    if !(smin > POLAR_TOL * smax) {
        return Err(Error::Singular {
            what: "polar decomposition input".into(),
            detail: format!("smallest singular value {smin:.3e} vs largest {smax:.3e}"),
        });
    }
    Ok(w.dot(&vt))
}

/// Orthonormal basis (columns) of the right null space `{x : M·x ≈ 0}`,
/// keeping right singular vectors whose singular value is at most `tol`.
pub fn null_space(m: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite(m, "null space input")?;
    let cols = m.ncols();
    if m.nrows() == 0 {
        return Ok(identity(cols));
    }
    if cols == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let (_, sigma, vt) = m.svddc(JobSvd::All).map_err(|e| lapack_error("dgesdd", e))?;
    let vt = vt.expect("requested right vectors");
    let idx: Vec<usize> = (0..cols).filter(|&k| sigma.get(k).map_or(true, |&s| s <= tol)).collect();
    Ok(vt.select(ndarray::Axis(0), &idx).reversed_axes().as_standard_layout().to_owned())
}

/// `‖P₁ − P₂‖` for the projectors onto the spans of two orthonormal bases.
pub fn subspace_distance(basis1: &Matrix, basis2: &Matrix) -> f64 {
    projector_distance(&projector_from_basis(basis1), &projector_from_basis(basis2))
}

fn column_major(m: &Matrix) -> Vec<f64> {
    m.t().iter().copied().collect()
}

fn lapack_dim(n: usize) -> Result<c_int> {
    c_int::try_from(n).map_err(|_| Error::InvalidArgument(format!("dimension {n} too large")))
}

/// Solves `A·Z = B` by LU with a reciprocal-condition guard.
pub fn solve(a: &Matrix, b: &Matrix, what: &str) -> Result<Matrix> {
    let n = ensure_square(a, what)?;
    if b.nrows() != n {
        return Err(Error::dimension(what, format!("{n} right-hand-side rows"), b.nrows()));
    }
    if n == 0 || b.ncols() == 0 {
        return Ok(Array2::zeros(b.dim()));
    }
    let singular = |detail: String| Error::Singular { what: what.to_string(), detail };
    let n_i = lapack_dim(n)?;
    let nrhs = lapack_dim(b.ncols())?;
    let anorm = a.columns().into_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut lu = column_major(a);
    let mut ipiv = vec![0 as c_int; n];
    let mut info: c_int = 0;
    // SAFETY: `lu` holds n·n entries and `ipiv` n entries.
    unsafe { lapack_sys::dgetrf_(&n_i, &n_i, lu.as_mut_ptr(), &n_i, ipiv.as_mut_ptr(), &mut info) };
    if info > 0 {
        return Err(singular(format!("exactly zero pivot at position {info}")));
    }
    if info < 0 {
        return Err(Error::Lapack { routine: "dgetrf", info });
    }
    let norm_kind = b'1' as c_char;
    let mut rcond = 0.0;
    let mut work = vec![0.0; 4 * n];
    let mut iwork = vec![0 as c_int; n];
    // SAFETY: workspace sizes follow the routine's documented minimums.
    unsafe {
        lapack_sys::dgecon_(
            &norm_kind,
            &n_i,
            lu.as_ptr(),
            &n_i,
            &anorm,
            &mut rcond,
            work.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        )
    };
    if info != 0 {
        return Err(Error::Lapack { routine: "dgecon", info });
    }
    if !(rcond >= RCOND_MIN) {
        return Err(singular(format!("reciprocal condition {rcond:.3e} below {RCOND_MIN:.0e}")));
    }
    let trans = b'N' as c_char;
    let mut rhs = column_major(b);
    // SAFETY: `rhs` holds n·nrhs entries with leading dimension n.
    unsafe {
        lapack_sys::dgetrs_(&trans, &n_i, &nrhs, lu.as_ptr(), &n_i, ipiv.as_ptr(), rhs.as_mut_ptr(), &n_i, &mut info)
    };
    if info != 0 {
        return Err(Error::Lapack { routine: "dgetrs", info });
    }
    Ok(Array2::from_shape_vec(b.dim().f(), rhs)
        .expect("LAPACK returns an n-by-nrhs solution")
        .as_standard_layout()
        .to_owned())
}

/// Assembles `[[a, b], [c, d]]`.
pub fn from_blocks(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Matrix {
    let (p, m) = (a.nrows(), c.nrows());
    let (q, k) = (a.ncols(), b.ncols());
    debug_assert_eq!(b.nrows(), p);
    debug_assert_eq!(d.dim(), (m, k));
    debug_assert_eq!(c.ncols(), q);
    let mut out = Array2::zeros((p + m, q + k));
    out.slice_mut(s![..p, ..q]).assign(a);
    out.slice_mut(s![..p, q..]).assign(b);
    out.slice_mut(s![p.., ..q]).assign(c);
    out.slice_mut(s![p.., q..]).assign(d);
    out
}

/// Block-diagonal matrix `diag(a, d)`.
pub fn block_diag(a: &Matrix, d: &Matrix) -> Matrix {
    let b = Array2::zeros((a.nrows(), d.ncols()));
    let c = Array2::zeros((d.nrows(), a.ncols()));
    from_blocks(a, &b, &c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn eigh_diagonal_input_is_permuted_identity() {
        let eig = eigh(&array![[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(eig.values.to_vec(), vec![1.0, 2.0]);
        let v = eig.vectors.mapv(f64::abs);
        assert_abs_diff_eq!(v, array![[0.0, 1.0], [1.0, 0.0]], epsilon = 1e-15);
    }

    #[test]
    fn eigh_two_by_two_indefinite() {
        let eig = eigh(&array![[1.0, 1.0], [1.0, -1.0]]).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(eig.values[0], -r2, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], r2, epsilon = 1e-14);
    }

    #[test]
    fn eigh_identity() {
        let eig = eigh(&identity(3)).unwrap();
        assert_abs_diff_eq!(eig.values, array![1.0, 1.0, 1.0], epsilon = 1e-15);
    }

    #[test]
    fn eigh_rejects_bad_input() {
        assert!(matches!(eigh(&Array2::zeros((2, 3))), Err(Error::Dimension { .. })));
        assert!(matches!(eigh(&array![[1.0, 2.0], [0.0, 1.0]]), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn eigh_residual_and_orthogonality_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[1usize, 5, 40, 200] {
            let m = random(n, n, &mut rng);
            let s = symmetrize(&(&m + &m.t()));
            let eig = eigh(&s).unwrap();
            let norm = eig.abs_max();
            let resid = spectral_norm(&(&s - &eig.reconstruct()));
            assert!(resid <= 1e-10 * n as f64 * norm, "n={n} resid={resid}");
            let gram = eig.vectors.t().dot(&eig.vectors);
            assert!(max_abs_diff(&gram, &identity(n)) <= 1e-12 * n as f64);
            assert!(eig.values.windows(2).into_iter().all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn singular_value_examples() {
        assert_abs_diff_eq!(
            singular_values(&array![[3.0, 0.0], [0.0, 4.0]]).unwrap(),
            array![4.0, 3.0],
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(singular_values(&Array2::zeros((3, 2))).unwrap(), array![0.0, 0.0]);
        assert_abs_diff_eq!(
            singular_values(&array![[0.0, -1.0], [1.0, 0.0]]).unwrap(),
            array![1.0, 1.0],
            epsilon = 1e-15
        );
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random(9, 6, &mut rng);
        let sigma = singular_values(&m).unwrap();
        let gram = eigvalsh(&symmetrize(&m.t().dot(&m))).unwrap();
        for (k, s) in sigma.iter().enumerate() {
            let from_gram = gram[gram.len() - 1 - k].max(0.0).sqrt();
            assert!((s - from_gram).abs() <= 1e-10);
        }
    }

    #[test]
    fn inverse_square_root_examples() {
        assert_abs_diff_eq!(psd_inv_sqrt(&array![[4.0]]).unwrap(), array![[0.5]], epsilon = 1e-15);
        assert_abs_diff_eq!(psd_inv_sqrt(&identity(3)).unwrap(), identity(3), epsilon = 1e-15);
        let d = Array2::from_diag(&array![1.0, 4.0, 9.0]);
        assert_abs_diff_eq!(
            psd_inv_sqrt(&d).unwrap(),
            Array2::from_diag(&array![1.0, 0.5, 1.0 / 3.0]),
            epsilon = 1e-15
        );
        let singular = Array2::from_diag(&array![1.0, 0.0]);
        assert!(matches!(psd_inv_sqrt(&singular), Err(Error::Singular { .. })));
    }

    #[test]
    fn inverse_square_root_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(12, 12, &mut rng);
        let s = symmetrize(&(m.t().dot(&m) + identity(12)));
        let r = psd_inv_sqrt(&s).unwrap();
        assert!(max_abs_diff(&r.dot(&s).dot(&r), &identity(12)) <= 1e-12);
    }

    #[test]
    fn polar_examples() {
        let h = 0.5f64.sqrt();
        let u = polar_orthogonal(&array![[1.0, -1.0], [1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(u, array![[h, -h], [h, h]], epsilon = 1e-15);
        let rot = array![[0.6, -0.8], [0.8, 0.6]];
        assert_abs_diff_eq!(polar_orthogonal(&rot).unwrap(), rot, epsilon = 1e-15);
        let d = Array2::from_diag(&array![2.0, 3.0]);
        assert_abs_diff_eq!(polar_orthogonal(&d).unwrap(), identity(2), epsilon = 1e-15);
        let rank_one = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(polar_orthogonal(&rank_one), Err(Error::Singular { .. })));
    }

    #[test]
    fn polar_reconstructs_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random(7, 7, &mut rng);
            let u = polar_orthogonal(&m).unwrap();
            let h = psd_sqrt(&symmetrize(&m.t().dot(&m))).unwrap();
            assert!(spectral_norm(&(u.dot(&h) - &m)) <= 1e-10 * spectral_norm(&m));
            assert!(max_abs_diff(&u.t().dot(&u), &identity(7)) <= 1e-12);
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert_abs_diff_eq!(spectral_norm(&Array2::from_diag(&array![1.0, -5.0])), 5.0, epsilon = 1e-14);
        let u = array![[0.6], [0.8]];
        let v = array![[0.0, 1.0, 0.0]];
        assert_abs_diff_eq!(spectral_norm(&u.dot(&v)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spectral_norm(&array![[1.0, 1.0], [1.0, -1.0]]), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn solve_guards_singular_systems() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![[1.0], [2.0]];
        let x = solve(&a, &b, "test system").unwrap();
        assert_abs_diff_eq!(a.dot(&x), b, epsilon = 1e-14);
        let sing = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(solve(&sing, &b, "test system"), Err(Error::Singular { .. })));
    }
}
