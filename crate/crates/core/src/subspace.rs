//! Graph subspaces `G(H₊, X) = {x ⊕ Xx}` and the direct rotation onto them.
//!
//! For an angular operator `X: H₊ → H₋` the skew generator is
//! `Y = [[0, −Xᵀ], [X, 0]]` and the direct rotation `U` is the orthogonal
//! factor of `I + Y = U·|I + Y|`. It is computed from the closed four-block
//! form; the polar route exists as an independent cross-check.

use ndarray::{s, Array1, Array2};
use serde::Serialize;

use crate::blockform::{BlockDecomposition, SaddlePointMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, from_blocks, identity, spectral_norm, EigDecomposition, Matrix};

/// Condition-number ceiling for inverting the leading block of a projector.
pub const GRAPH_CONDITION_LIMIT: f64 = 1e12;

/// Agreement required between the closed-form and polar rotations.
pub const ROTATION_CROSS_CHECK_TOL: f64 = 1e-10;

/// Linear map `X: H₊ → H₋` whose graph is a subspace of `H₊ ⊕ H₋`.
#[derive(Debug, Clone)]
pub struct AngularOperator {
    pub x: Matrix,
    pub norm_x: f64,
}

impl AngularOperator {
    pub fn new(x: Matrix) -> Self {
        let norm_x = spectral_norm(&x);
        Self { x, norm_x }
    }

    pub fn zero(dec: BlockDecomposition) -> Self {
        Self::new(Array2::zeros((dec.dim_minus, dec.dim_plus)))
    }

    pub fn dec(&self) -> BlockDecomposition {
        BlockDecomposition { dim_plus: self.x.ncols(), dim_minus: self.x.nrows() }
    }

    pub fn is_contraction(&self) -> bool {
        self.norm_x <= 1.0
    }
}

/// `Y = [[0, −Xᵀ], [X, 0]]`.
pub fn skew_generator(x: &Matrix) -> Matrix {
    let (m, p) = x.dim();
    from_blocks(&Array2::zeros((p, p)), &(-&x.t()), x, &Array2::zeros((m, m)))
}

fn plus_gram(x: &Matrix) -> Result<EigDecomposition> {
    let p = x.ncols();
    linalg::eigh(&linalg::symmetrize(&(identity(p) + x.t().dot(x))))
}

fn minus_gram(x: &Matrix) -> Result<EigDecomposition> {
    let m = x.nrows();
    linalg::eigh(&linalg::symmetrize(&(identity(m) + x.dot(&x.t()))))
}

/// Orthogonal projectors `(Q, Q⊥)` onto the graph of `X` and its complement.
pub fn graph_projector(x: &AngularOperator) -> Result<(Matrix, Matrix)> {
    let x = &x.x;
    let kp = plus_gram(x)?.map_values(|l| 1.0 / l);
    let km = minus_gram(x)?.map_values(|l| 1.0 / l);
    let xkp = x.dot(&kp);
    let q = from_blocks(&kp, &xkp.t().to_owned(), &xkp, &xkp.dot(&x.t()));
    let kmx = km.dot(x);
    let q_perp = from_blocks(&x.t().dot(&kmx), &(-&kmx.t()), &(-&kmx), &km);
    Ok((linalg::symmetrize(&q), linalg::symmetrize(&q_perp)))
}

/// Recovers `X = Q₂₁·Q₁₁⁻¹` from the projector onto a graph subspace.
pub fn angular_from_projector(q: &Matrix, dec: BlockDecomposition) -> Result<AngularOperator> {
    if q.dim() != (dec.total(), dec.total()) {
        return Err(Error::dimension(
            "projector",
            format!("{0}x{0}", dec.total()),
            format!("{}x{}", q.nrows(), q.ncols()),
        ));
    }
    let p = dec.dim_plus;
    let q11 = linalg::symmetrize(&q.slice(s![..p, ..p]).to_owned());
    let q21 = q.slice(s![p.., ..p]).to_owned();
    let values = linalg::eigvalsh(&q11)?;
    let min = values.first().copied().unwrap_or(0.0);
    let max = values.last().copied().unwrap_or(0.0);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= GRAPH_CONDITION_LIMIT) {
        return Err(Error::NotGraphSubspace { condition, limit: GRAPH_CONDITION_LIMIT });
    }
    // Q₁₁ is symmetric, so Xᵀ = Q₁₁⁻¹·Q₂₁ᵀ.
    let x_t = linalg::solve(&q11, &q21.t().to_owned(), "Q₁₁")?;
    Ok(AngularOperator::new(x_t.reversed_axes().as_standard_layout().to_owned()))
}

/// Operator angle between `ran P` and `ran Q`.
#[derive(Debug, Clone)]
pub struct OperatorAngle {
    /// `Θ` as an operator on `H`, supported on `ran P`.
    pub theta: Matrix,
    /// Spectrum of `Θ` on `ran P`, ascending, in `[0, π/2]`.
    pub angles: Array1<f64>,
    pub max_angle: f64,
}

/// Indices of the unit diagonal if `p` is a coordinate projector.
fn coordinate_support(p: &Matrix) -> Option<Vec<usize>> {
    let is_coordinate = p.indexed_iter().all(|((i, j), &v)| {
        if i == j {
            v == 0.0 || v == 1.0
        } else {
            v == 0.0
        }
    });
    is_coordinate.then(|| (0..p.nrows()).filter(|&i| p[[i, i]] == 1.0).collect())
}

/// `P·Q⊥·P` compressed to an orthonormal basis of `ran P`, with that basis.
fn compressed_sin2(p: &Matrix, q: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = linalg::ensure_square(q, "projector")?;
    linalg::ensure_square(p, "projector")?;
    if p.dim() != q.dim() {
        return Err(Error::dimension("projector pair", format!("{n}x{n}"), format!("{}x{}", p.nrows(), p.ncols())));
    }
    let q_perp = identity(n) - q;
    Ok(match coordinate_support(p) {
        Some(idx) => {
            let basis = identity(n).select(ndarray::Axis(1), &idx);
            let sin2 = q_perp.select(ndarray::Axis(0), &idx).select(ndarray::Axis(1), &idx);
            (linalg::symmetrize(&sin2), basis)
        }
        None => {
            let basis = linalg::eigh(p)?.select_vectors(|l| l > 0.5);
            (linalg::symmetrize(&basis.t().dot(&q_perp).dot(&basis)), basis)
        }
    })
}

fn angles_from_sin2(values: &Array1<f64>) -> Array1<f64> {
    values.mapv(|s| s.clamp(0.0, 1.0).sqrt().asin())
}

/// Spectrum of `Θ` on `ran P`, ascending, without forming `Θ`.
pub fn principal_angles(p: &Matrix, q: &Matrix) -> Result<Array1<f64>> {
    let (sin2, _) = compressed_sin2(p, q)?;
    Ok(angles_from_sin2(&linalg::eigvalsh(&sin2)?))
}

/// `Θ = arcsin √(P·Q⊥·P |_{ran P})` with spectrum in `[0, π/2]`.
pub fn operator_angle(p: &Matrix, q: &Matrix) -> Result<OperatorAngle> {
    let (sin2, basis) = compressed_sin2(p, q)?;
    let eig = linalg::eigh(&sin2)?;
    let angles = angles_from_sin2(&eig.values);
    let frame = basis.dot(&eig.vectors);
    let mut scaled = frame.clone();
    for (mut col, &theta) in scaled.columns_mut().into_iter().zip(angles.iter()) {
        col *= theta;
    }
    let theta = scaled.dot(&frame.t());
    let max_angle = angles.iter().copied().fold(0.0, f64::max);
    Ok(OperatorAngle { theta, angles, max_angle })
}

/// Orthogonal `U` with PSD diagonal blocks mapping `H₊` onto the graph of `X`.
#[derive(Debug, Clone)]
pub struct DirectRotation {
    pub u: Matrix,
    /// Skew generator `Y = [[0, −Xᵀ], [X, 0]]`.
    pub y: Matrix,
    /// `|I + Y| = ((I + Y)ᵀ(I + Y))^{1/2}`.
    pub abs_factor: Matrix,
}

/// Closed four-block form
///
/// ```text
/// U = [[ (I + XᵀX)^{−1/2}, −Xᵀ(I + XXᵀ)^{−1/2} ],
///      [ X(I + XᵀX)^{−1/2},  (I + XXᵀ)^{−1/2}   ]]
/// ```
pub fn direct_rotation_closed(x: &AngularOperator) -> Result<DirectRotation> {
    let x = &x.x;
    let gp = plus_gram(x)?;
    let gm = minus_gram(x)?;
    let sp = gp.map_values(|l| 1.0 / l.sqrt());
    let sm = gm.map_values(|l| 1.0 / l.sqrt());
    let u = from_blocks(&sp, &(-x.t().dot(&sm)), &x.dot(&sp), &sm);
    let abs_factor = block_diag(&gp.map_values(f64::sqrt), &gm.map_values(f64::sqrt));
    Ok(DirectRotation { u, y: skew_generator(x), abs_factor })
}

fn polar_construction(x: &AngularOperator) -> Result<DirectRotation> {
    let y = skew_generator(&x.x);
    let m = identity(y.nrows()) + &y;
    let u = linalg::polar_orthogonal(&m)?;
    let abs_factor = linalg::psd_sqrt(&linalg::symmetrize(&m.t().dot(&m)))?;
    Ok(DirectRotation { u, y, abs_factor })
}

/// Orthogonal factor of `I + Y`, verified against [`direct_rotation_closed`].
pub fn direct_rotation_polar(x: &AngularOperator) -> Result<DirectRotation> {
    let polar = polar_construction(x)?;
    let closed = direct_rotation_closed(x)?;
    let gap = spectral_norm(&(&polar.u - &closed.u));
    if !(gap <= ROTATION_CROSS_CHECK_TOL) {
        return Err(Error::Structure(format!(
            "polar and closed-form direct rotations disagree by {gap:.3e}"
        )));
    }
    Ok(polar)
}

/// Invariant defects of a direct rotation.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RotationDefects {
    /// `‖UᵀU − I‖`
    pub orthogonality: f64,
    /// `‖U·|I+Y| − (I+Y)‖`
    pub polar_reconstruction: f64,
    /// Smallest eigenvalue over both diagonal blocks of `U`.
    pub diagonal_min_eig: f64,
    /// Largest asymmetry of a diagonal block of `U`.
    pub diagonal_asymmetry: f64,
    /// `‖Y + Yᵀ‖`
    pub y_skew: f64,
    /// `‖JY + YJ‖`
    pub y_anticommutator: f64,
}

impl DirectRotation {
    pub fn defects(&self, dec: BlockDecomposition) -> Result<RotationDefects> {
        let n = dec.total();
        let orthogonality = spectral_norm(&(self.u.t().dot(&self.u) - identity(n)));
        let m = identity(n) + &self.y;
        let polar_reconstruction = spectral_norm(&(self.u.dot(&self.abs_factor) - &m));
        let (u11, u22) = dec.diagonal_blocks(&self.u);
        let diagonal_asymmetry = spectral_norm(&(&u11 - &u11.t())).max(spectral_norm(&(&u22 - &u22.t())));
        let min11 = linalg::eigvalsh(&linalg::symmetrize(&u11))?.first().copied().unwrap_or(0.0);
        let min22 = linalg::eigvalsh(&linalg::symmetrize(&u22))?.first().copied().unwrap_or(0.0);
        let j = crate::blockform::involution(dec);
        Ok(RotationDefects {
            orthogonality,
            polar_reconstruction,
            diagonal_min_eig: min11.min(min22),
            diagonal_asymmetry,
            y_skew: spectral_norm(&(&self.y + &self.y.t())),
            y_anticommutator: crate::blockform::anticommutator_defect(&j, &self.y),
        })
    }

    /// `‖Q·U·P − U·P‖`: how far `U` is from mapping `H₊` into `ran Q`.
    pub fn intertwining_defect(&self, q: &Matrix, dec: BlockDecomposition) -> f64 {
        let up = self.u.slice(s![.., ..dec.dim_plus]).to_owned();
        spectral_norm(&(q.dot(&up) - &up))
    }
}

/// `UᵀBU` and its block structure.
#[derive(Debug, Clone)]
pub struct BlockDiagonalization {
    pub bhat: Matrix,
    /// Spectral norm of the off-diagonal block of `UᵀBU`.
    pub off_diag_residual: f64,
    /// `B̂₊`, the upper diagonal block.
    pub bhat_plus: Matrix,
    /// `B̂₋`, the negated lower diagonal block.
    pub bhat_minus: Matrix,
    pub min_eig_plus: f64,
    pub min_eig_minus: f64,
}

impl BlockDiagonalization {
    /// Fails when the off-diagonal residual or the PSD defect of either
    /// diagonal block exceeds `tol·‖B‖`.
    pub fn ensure(&self, tol: f64, b_norm: f64) -> Result<()> {
        let limit = tol * b_norm;
        if !(self.off_diag_residual <= limit) {
            return Err(Error::Structure(format!(
                "off-diagonal residual {:.3e} exceeds {limit:.3e}",
                self.off_diag_residual
            )));
        }
        let min = self.min_eig_plus.min(self.min_eig_minus);
        if !(min >= -limit) {
            return Err(Error::Structure(format!("diagonal block has eigenvalue {min:.3e} below {:.3e}", -limit)));
        }
        Ok(())
    }

    /// Sorted union `eig(B̂₊) ∪ (−eig(B̂₋))`.
    pub fn combined_spectrum(&self) -> Result<Vec<f64>> {
        let plus = linalg::eigvalsh(&linalg::symmetrize(&self.bhat_plus))?;
        let minus = linalg::eigvalsh(&linalg::symmetrize(&self.bhat_minus))?;
        let mut all: Vec<f64> = plus.iter().copied().chain(minus.iter().map(|v| -v)).collect();
        all.sort_by(f64::total_cmp);
        Ok(all)
    }
}

/// Rotates `B` by `U` and splits `UᵀBU = diag(B̂₊, −B̂₋) + residual`.
pub fn block_diagonalize(b: &SaddlePointMatrix, u: &Matrix) -> Result<BlockDiagonalization> {
    let dec = b.dec();
    if u.dim() != (dec.total(), dec.total()) {
        return Err(Error::dimension("rotation", format!("{0}x{0}", dec.total()), format!("{}x{}", u.nrows(), u.ncols())));
    }
    let bhat = linalg::symmetrize(&u.t().dot(b.full()).dot(u));
    let (upper, lower) = dec.off_diagonal_blocks(&bhat);
    let off_diag_residual = spectral_norm(&upper).max(spectral_norm(&lower));
    let (bhat_plus, lower_diag) = dec.diagonal_blocks(&bhat);
    let bhat_minus = -lower_diag;
    let min_eig_plus = linalg::eigvalsh(&bhat_plus)?.first().copied().unwrap_or(0.0);
    let min_eig_minus = linalg::eigvalsh(&bhat_minus)?.first().copied().unwrap_or(0.0);
    Ok(BlockDiagonalization { bhat, off_diag_residual, bhat_plus, bhat_minus, min_eig_plus, min_eig_minus })
}

/// Residuals of the similarity identities behind the block diagonalization.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityResiduals {
    /// `‖(A+V)(I+Y) − (I+Y)(A+VY)‖`
    pub right_intertwining: f64,
    /// `‖(I−Y)(A+V) − (A−YV)(I−Y)‖`
    pub left_intertwining: f64,
    /// Off-diagonal part of `(I−Y)·B·(I−Y)⁻¹`.
    pub similarity_off_diagonal: f64,
    /// `‖(I−Y)·B·(I−Y)⁻¹ − (A − YV)‖`
    pub similarity_gap: f64,
}

impl SimilarityResiduals {
    pub fn max(&self) -> f64 {
        self.right_intertwining
            .max(self.left_intertwining)
            .max(self.similarity_off_diagonal)
            .max(self.similarity_gap)
    }
}

pub fn similarity_identity_residuals(b: &SaddlePointMatrix, x: &AngularOperator) -> Result<SimilarityResiduals> {
    let dec = b.dec();
    if x.dec() != dec {
        return Err(Error::dimension(
            "angular operator",
            format!("{}x{}", dec.dim_minus, dec.dim_plus),
            format!("{}x{}", x.x.nrows(), x.x.ncols()),
        ));
    }
    let n = dec.total();
    let a = b.diagonal_part();
    let v = b.off_diagonal_part();
    let y = skew_generator(&x.x);
    let i_plus_y = identity(n) + &y;
    let i_minus_y = identity(n) - &y;
    let vy = v.dot(&y);
    let yv = y.dot(&v);

    let right = b.full().dot(&i_plus_y) - i_plus_y.dot(&(&a + &vy));
    let reduced = &a - &yv;
    let left = i_minus_y.dot(b.full()) - reduced.dot(&i_minus_y);
    // T = (I−Y)·B·(I−Y)⁻¹ solves Tᵀ = (I+Y)⁻¹·B·(I+Y), as (I−Y)ᵀ = I+Y.
    let t = linalg::solve(&i_plus_y, &b.full().dot(&i_plus_y), "I + Y")?.reversed_axes();
    let t = t.as_standard_layout().to_owned();
    Ok(SimilarityResiduals {
        right_intertwining: spectral_norm(&right),
        left_intertwining: spectral_norm(&left),
        similarity_off_diagonal: spectral_norm(&dec.off_diagonal_part(&t)),
        similarity_gap: spectral_norm(&(&t - &reduced)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{default_zero_tol, spectral_split};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::f64::consts::PI;

    fn scalar(x: f64) -> AngularOperator {
        AngularOperator::new(array![[x]])
    }

    fn rotation(angle: f64) -> Matrix {
        array![[angle.cos(), -angle.sin()], [angle.sin(), angle.cos()]]
    }

    fn saddle(a: f64, d: f64, w: f64) -> SaddlePointMatrix {
        SaddlePointMatrix::assemble(array![[a]], array![[d]], array![[w]]).unwrap()
    }

    #[test]
    fn graph_projector_examples() {
        let (q, q_perp) = graph_projector(&scalar(1.0)).unwrap();
        assert_abs_diff_eq!(q, array![[0.5, 0.5], [0.5, 0.5]], epsilon = 1e-15);
        assert_abs_diff_eq!(&q + &q_perp, identity(2), epsilon = 1e-15);

        let zero = AngularOperator::zero(BlockDecomposition::new(2, 1).unwrap());
        let (q, _) = graph_projector(&zero).unwrap();
        assert_abs_diff_eq!(q, Array2::from_diag(&array![1.0, 1.0, 0.0]), epsilon = 1e-15);

        let t = 2f64.sqrt() - 1.0;
        let (q, _) = graph_projector(&scalar(t)).unwrap();
        assert_abs_diff_eq!(q[[0, 0]], 1.0 / (4.0 - 2.0 * 2f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(q[[0, 0]], 0.8536, epsilon = 1e-4);
        assert_abs_diff_eq!(q.dot(&q), q, epsilon = 1e-15);
    }

    #[test]
    fn angular_from_projector_examples() {
        let dec = BlockDecomposition::new(1, 1).unwrap();
        let x = angular_from_projector(&array![[0.5, 0.5], [0.5, 0.5]], dec).unwrap();
        assert_abs_diff_eq!(x.x[[0, 0]], 1.0, epsilon = 1e-15);
        let x = angular_from_projector(&array![[1.0, 0.0], [0.0, 0.0]], dec).unwrap();
        assert_eq!(x.x[[0, 0]], 0.0);

        let b = saddle(1.0, 1.0, 1.0);
        let q = spectral_split(&b, default_zero_tol(&b)).unwrap().projector_plus();
        let x = angular_from_projector(&q, dec).unwrap();
        assert_abs_diff_eq!(x.x[[0, 0]], 2f64.sqrt() - 1.0, epsilon = 1e-14);

        let vertical = array![[0.0, 0.0], [0.0, 1.0]];
        assert!(matches!(angular_from_projector(&vertical, dec), Err(Error::NotGraphSubspace { .. })));
    }

    #[test]
    fn operator_angle_examples() {
        let p = array![[1.0, 0.0], [0.0, 0.0]];
        let a = operator_angle(&p, &array![[0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(a.max_angle, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.max_angle.sin().powi(2), 0.5, epsilon = 1e-15);

        let a = operator_angle(&p, &p).unwrap();
        assert_eq!(a.max_angle, 0.0);

        let (q, _) = graph_projector(&scalar(2f64.sqrt() - 1.0)).unwrap();
        let a = operator_angle(&p, &q).unwrap();
        assert_abs_diff_eq!(a.max_angle, PI / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.max_angle.tan(), 2f64.sqrt() - 1.0, epsilon = 1e-14);

        // Non-coordinate P takes the eigensolver path.
        let r = rotation(0.3);
        let p_rot = r.dot(&p).dot(&r.t());
        let q_rot = r.dot(&q).dot(&r.t());
        let a = operator_angle(&p_rot, &q_rot).unwrap();
        assert_abs_diff_eq!(a.max_angle, PI / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_rotation_examples() {
        let zero = AngularOperator::zero(BlockDecomposition::new(2, 3).unwrap());
        assert_abs_diff_eq!(direct_rotation_closed(&zero).unwrap().u, identity(5), epsilon = 1e-15);
        assert_abs_diff_eq!(direct_rotation_closed(&scalar(1.0)).unwrap().u, rotation(PI / 4.0), epsilon = 1e-15);
        let u = direct_rotation_closed(&scalar(2f64.sqrt() - 1.0)).unwrap().u;
        assert_abs_diff_eq!(u, rotation(PI / 8.0), epsilon = 1e-15);
        assert_abs_diff_eq!(u[[0, 0]], 0.92388, epsilon = 1e-5);
        assert_abs_diff_eq!(u[[1, 0]], 0.38268, epsilon = 1e-5);
    }

    #[test]
    fn polar_rotation_examples() {
        assert_abs_diff_eq!(direct_rotation_polar(&scalar(1.0)).unwrap().u, rotation(PI / 4.0), epsilon = 1e-15);
        let zero = AngularOperator::zero(BlockDecomposition::new(1, 1).unwrap());
        assert_abs_diff_eq!(direct_rotation_polar(&zero).unwrap().u, identity(2), epsilon = 1e-15);
    }

    #[test]
    fn rotation_defects_vanish() {
        let x = AngularOperator::new(array![[0.3, -1.2, 0.5], [2.0, 0.1, -0.4]]);
        let dec = x.dec();
        for rot in [direct_rotation_closed(&x).unwrap(), direct_rotation_polar(&x).unwrap()] {
            let d = rot.defects(dec).unwrap();
            assert!(d.orthogonality < 1e-14, "{d:?}");
            assert!(d.polar_reconstruction < 1e-13, "{d:?}");
            assert!(d.diagonal_min_eig > 0.0);
            assert!(d.diagonal_asymmetry < 1e-14);
            assert_eq!(d.y_skew, 0.0);
            assert_eq!(d.y_anticommutator, 0.0);
            let (q, _) = graph_projector(&x).unwrap();
            assert!(rot.intertwining_defect(&q, dec) < 1e-14);
        }
    }

    #[test]
    fn block_diagonalize_examples() {
        let b = saddle(1.0, 1.0, 1.0);
        let u = direct_rotation_closed(&scalar(2f64.sqrt() - 1.0)).unwrap().u;
        let bd = block_diagonalize(&b, &u).unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(bd.bhat, array![[r2, 0.0], [0.0, -r2]], epsilon = 1e-14);
        assert!(bd.ensure(1e-12, b.norm()).is_ok());

        let decoupled = saddle(2.0, 3.0, 0.0);
        let bd = block_diagonalize(&decoupled, &identity(2)).unwrap();
        assert_eq!(&bd.bhat, decoupled.full());
        assert_eq!(bd.off_diag_residual, 0.0);

        let golden = saddle(1.0, 0.0, 1.0);
        let q = spectral_split(&golden, default_zero_tol(&golden)).unwrap().projector_plus();
        let x = angular_from_projector(&q, golden.dec()).unwrap();
        assert_abs_diff_eq!(x.x[[0, 0]], (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-14);
        let bd = block_diagonalize(&golden, &direct_rotation_closed(&x).unwrap().u).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(bd.bhat, array![[phi, 0.0], [0.0, 1.0 - phi]], epsilon = 1e-14);

        let wrong = block_diagonalize(&b, &identity(2)).unwrap();
        assert!(wrong.ensure(1e-12, b.norm()).is_err());
    }

    #[test]
    fn similarity_residual_examples() {
        let b = saddle(1.0, 1.0, 1.0);
        let exact = similarity_identity_residuals(&b, &scalar(2f64.sqrt() - 1.0)).unwrap();
        assert!(exact.max() <= 1e-12, "{exact:?}");

        let decoupled = saddle(1.0, 2.0, 0.0);
        let zero = AngularOperator::zero(decoupled.dec());
        assert_eq!(similarity_identity_residuals(&decoupled, &zero).unwrap().max(), 0.0);

        let perturbed = similarity_identity_residuals(&b, &scalar(2f64.sqrt() - 1.0 + 1e-3)).unwrap();
        // Riccati derivative at the root: 2x + 2 = 2√2.
        let first_order = 2.0 * 2f64.sqrt() * 1e-3;
        assert!((perturbed.right_intertwining - first_order).abs() < 1e-5, "{perturbed:?}");
        assert!(perturbed.max() < 2.0 * first_order);
    }
}
