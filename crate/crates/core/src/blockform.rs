//! Saddle-point block matrices `B = [[A₊, Wᵀ], [W, −A₋]]` on `H₊ ⊕ H₋`.
//!
//! `B` splits as `A + V` with the diagonal part `A = diag(A₊, −A₋)` and the
//! off-diagonal part `V = [[0, Wᵀ], [W, 0]]`. The involution
//! `J = diag(I, −I)` commutes with `A` and anticommutes with `V`.

use std::sync::OnceLock;

use ndarray::{s, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, from_blocks, identity, spectral_norm, Matrix};

/// Relative tolerance for the PSD check on the diagonal blocks.
pub const PSD_INPUT_TOL: f64 = 1e-10;

/// Dimensions of the orthogonal decomposition `H = H₊ ⊕ H₋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockDecomposition {
    pub dim_plus: usize,
    pub dim_minus: usize,
}

impl BlockDecomposition {
    pub fn new(dim_plus: usize, dim_minus: usize) -> Result<Self> {
        if dim_plus == 0 || dim_minus == 0 {
            return Err(Error::InvalidArgument(format!(
                "both blocks must be non-empty, got dimensions ({dim_plus}, {dim_minus})"
            )));
        }
        Ok(Self { dim_plus, dim_minus })
    }

    pub fn total(&self) -> usize {
        self.dim_plus + self.dim_minus
    }

    /// Orthogonal projector onto `H₊`.
    pub fn plus_projector(&self) -> Matrix {
        let mut p = Array2::zeros((self.total(), self.total()));
        p.slice_mut(s![..self.dim_plus, ..self.dim_plus]).assign(&identity(self.dim_plus));
        p
    }

    /// Off-diagonal blocks `(M₁₂, M₂₁)` of a matrix on `H₊ ⊕ H₋`.
    pub fn off_diagonal_blocks(&self, m: &Matrix) -> (Matrix, Matrix) {
        let p = self.dim_plus;
        (m.slice(s![..p, p..]).to_owned(), m.slice(s![p.., ..p]).to_owned())
    }

    /// Diagonal blocks `(M₁₁, M₂₂)`.
    pub fn diagonal_blocks(&self, m: &Matrix) -> (Matrix, Matrix) {
        let p = self.dim_plus;
        (m.slice(s![..p, ..p]).to_owned(), m.slice(s![p.., p..]).to_owned())
    }

    /// Keeps only the off-diagonal blocks of `m`.
    pub fn off_diagonal_part(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        let p = self.dim_plus;
        out.slice_mut(s![..p, ..p]).fill(0.0);
        out.slice_mut(s![p.., p..]).fill(0.0);
        out
    }
}

/// `J = diag(I_{H₊}, −I_{H₋})`.
pub fn involution(dec: BlockDecomposition) -> Matrix {
    let mut j = identity(dec.total());
    for i in dec.dim_plus..dec.total() {
        j[[i, i]] = -1.0;
    }
    j
}

/// Immutable saddle-point matrix with its assembled full form.
#[derive(Debug, Clone)]
pub struct SaddlePointMatrix {
    dec: BlockDecomposition,
    a_plus: Matrix,
    a_minus: Matrix,
    w: Matrix,
    full: Matrix,
    norm: OnceLock<f64>,
}

fn validate_psd_block(m: &Matrix, dim: usize, name: &str) -> Result<Matrix> {
    if m.dim() != (dim, dim) {
        return Err(Error::dimension(name, format!("{dim}x{dim}"), format!("{}x{}", m.nrows(), m.ncols())));
    }
    let sym = linalg::checked_symmetric(m, name)?;
    let values = linalg::eigvalsh(&sym)?;
    let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = values.first().copied().unwrap_or(0.0);
    let tol = PSD_INPUT_TOL * scale;
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite { block: name.to_string(), min_eig: min, tol: -tol });
    }
    Ok(sym)
}

impl SaddlePointMatrix {
    /// Validates the blocks and assembles `B = [[A₊, Wᵀ], [W, −A₋]]`.
    ///
    /// `a_plus` and `a_minus` must be symmetric positive semidefinite and `w`
    /// must map `H₊` into `H₋`. Input blocks are validated, never projected.
    pub fn assemble(a_plus: Matrix, a_minus: Matrix, w: Matrix) -> Result<Self> {
        let dec = BlockDecomposition::new(a_plus.nrows(), a_minus.nrows())?;
        linalg::ensure_finite(&w, "w")?;
        if w.dim() != (dec.dim_minus, dec.dim_plus) {
            return Err(Error::dimension(
                "w",
                format!("{}x{}", dec.dim_minus, dec.dim_plus),
                format!("{}x{}", w.nrows(), w.ncols()),
            ));
        }
        let a_plus = validate_psd_block(&a_plus, dec.dim_plus, "aPlus")?;
        let a_minus = validate_psd_block(&a_minus, dec.dim_minus, "aMinus")?;
        let full = from_blocks(&a_plus, &w.t().to_owned(), &w, &(-&a_minus));
        Ok(Self { dec, a_plus, a_minus, w, full, norm: OnceLock::new() })
    }

    pub fn dec(&self) -> BlockDecomposition {
        self.dec
    }

    pub fn a_plus(&self) -> &Matrix {
        &self.a_plus
    }

    pub fn a_minus(&self) -> &Matrix {
        &self.a_minus
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    /// The assembled matrix `B`.
    pub fn full(&self) -> &Matrix {
        &self.full
    }

    /// Diagonal part `A = diag(A₊, −A₋)`.
    pub fn diagonal_part(&self) -> Matrix {
        block_diag(&self.a_plus, &(-&self.a_minus))
    }

    /// Off-diagonal part `V = [[0, Wᵀ], [W, 0]]`.
    pub fn off_diagonal_part(&self) -> Matrix {
        self.dec.off_diagonal_part(&self.full)
    }

    /// `|A| = diag(A₊, A₋)`, formed blockwise.
    pub fn abs_diagonal(&self) -> Matrix {
        block_diag(&self.a_plus, &self.a_minus)
    }

    pub fn involution(&self) -> Matrix {
        involution(self.dec)
    }

    /// Spectral norm `‖B‖`, computed once.
    pub fn norm(&self) -> f64 {
        *self.norm.get_or_init(|| spectral_norm(&self.full))
    }

    /// Records `‖B‖` obtained from a full eigendecomposition.
    pub(crate) fn seed_norm(&self, norm: f64) {
        let _ = self.norm.set(norm);
    }

    /// `(|A| + I)^{−1/2}`, formed blockwise.
    pub fn form_normalizer(&self) -> Result<Matrix> {
        let plus = linalg::psd_inv_sqrt(&(&self.a_plus + &identity(self.dec.dim_plus)))?;
        let minus = linalg::psd_inv_sqrt(&(&self.a_minus + &identity(self.dec.dim_minus)))?;
        Ok(block_diag(&plus, &minus))
    }
}

/// Commutation defects of the diagonal/off-diagonal split.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StructureDiagnostics {
    /// `‖JA − AJ‖`
    pub diagonal_commutator: f64,
    /// `‖JV + VJ‖`
    pub off_diagonal_anticommutator: f64,
    /// `‖B − (A + V)‖`
    pub split_defect: f64,
    /// `‖A − J|A|‖`
    pub sign_defect: f64,
}

/// `‖JM + MJ‖` for an arbitrary matrix `M`.
pub fn anticommutator_defect(j: &Matrix, m: &Matrix) -> f64 {
    spectral_norm(&(j.dot(m) + m.dot(j)))
}

/// `‖JM − MJ‖` for an arbitrary matrix `M`.
pub fn commutator_defect(j: &Matrix, m: &Matrix) -> f64 {
    spectral_norm(&(j.dot(m) - m.dot(j)))
}

pub fn check_structure(b: &SaddlePointMatrix) -> StructureDiagnostics {
    let j = b.involution();
    let a = b.diagonal_part();
    let v = b.off_diagonal_part();
    StructureDiagnostics {
        diagonal_commutator: commutator_defect(&j, &a),
        off_diagonal_anticommutator: anticommutator_defect(&j, &v),
        split_defect: spectral_norm(&(b.full() - &a - &v)),
        sign_defect: spectral_norm(&(&a - &j.dot(&b.abs_diagonal()))),
    }
}

/// `R = (|A|+I)^{−1/2} V (|A|+I)^{−1/2}`.
pub fn relative_coupling(b: &SaddlePointMatrix) -> Result<Matrix> {
    let n = b.form_normalizer()?;
    Ok(linalg::symmetrize(&n.dot(&b.off_diagonal_part()).dot(&n)))
}

/// Smallest constant `β` with `|xᵀVx| ≤ β·xᵀ(|A|+I)x` for all `x`.
pub fn form_bound_beta(b: &SaddlePointMatrix) -> Result<f64> {
    Ok(spectral_norm(&relative_coupling(b)?))
}

/// Spectral gap of `J + R` around zero.
#[derive(Debug, Clone)]
pub struct JPlusRGap {
    pub r: Matrix,
    pub min_abs_eig: f64,
    /// `‖JR + RJ‖`, zero for off-diagonal `R`.
    pub anticommutator_defect: f64,
}

/// `min |λ(J + R)|` for a symmetric `R`. For off-diagonal `R` this is ≥ 1,
/// since `(J + R)² = I + R²`.
pub fn j_plus_r_min_abs_eig(j: &Matrix, r: &Matrix) -> Result<f64> {
    let values = linalg::eigvalsh(&(j + r))?;
    Ok(values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

pub fn j_plus_r_gap(b: &SaddlePointMatrix) -> Result<JPlusRGap> {
    let r = relative_coupling(b)?;
    let j = b.involution();
    let min_abs_eig = j_plus_r_min_abs_eig(&j, &r)?;
    let anticommutator_defect = anticommutator_defect(&j, &r);
    Ok(JPlusRGap { r, min_abs_eig, anticommutator_defect })
}
