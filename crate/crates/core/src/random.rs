//! Seeded random saddle-point instances.
//!
//! `A± = MᵀM` with standard normal `M`, `W` standard normal times a coupling
//! factor. Kernels are engineered by zeroing columns of `M₊` (with the
//! matching columns of `W`) or of `M₋` (with the matching rows of `W`), and
//! then hidden by random orthogonal changes of basis inside `H₊` and `H₋`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::blockform::{BlockDecomposition, SaddlePointMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Generator for case `index` of a run seeded with `seed`.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Orthogonal factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Result<Matrix> {
    // A Gaussian square matrix is singular with probability zero; retry anyway.
    for _ in 0..8 {
        if let Ok(q) = linalg::polar_orthogonal(&gaussian_matrix(n, n, rng)) {
            return Ok(q);
        }
    }
    Err(Error::Singular { what: "random orthogonal".into(), detail: "repeated singular draws".into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceSpec {
    pub dim_plus: usize,
    pub dim_minus: usize,
    pub coupling: f64,
    /// Engineered `dim(Ker B ∩ H₊)`.
    pub kernel_plus: usize,
    /// Engineered `dim(Ker B ∩ H₋)`.
    pub kernel_minus: usize,
}

impl InstanceSpec {
    pub fn kernel_free(dim_plus: usize, dim_minus: usize, coupling: f64) -> Self {
        Self { dim_plus, dim_minus, coupling, kernel_plus: 0, kernel_minus: 0 }
    }

    /// Draws a shape with total dimension in `[4, n_max]`; about half of the
    /// draws carry an engineered kernel.
    pub fn draw(n_max: usize, coupling: f64, rng: &mut impl Rng) -> Result<Self> {
        if n_max < 4 {
            return Err(Error::InvalidArgument(format!("maximum dimension must be at least 4, got {n_max}")));
        }
        let total = rng.random_range(4..=n_max);
        let dim_plus = rng.random_range(1..total);
        let dim_minus = total - dim_plus;
        let (kernel_plus, kernel_minus) = if rng.random_bool(0.5) {
            (rng.random_range(0..=dim_plus / 2), rng.random_range(0..=dim_minus / 2))
        } else {
            (0, 0)
        };
        Ok(Self { dim_plus, dim_minus, coupling, kernel_plus, kernel_minus })
    }
}

/// Random saddle-point matrix following `spec`.
pub fn random_saddle_point(spec: &InstanceSpec, rng: &mut impl Rng) -> Result<SaddlePointMatrix> {
    let dec = BlockDecomposition::new(spec.dim_plus, spec.dim_minus)?;
    if spec.kernel_plus > dec.dim_plus || spec.kernel_minus > dec.dim_minus {
        return Err(Error::InvalidArgument(format!(
            "kernel dims ({}, {}) exceed block dims ({}, {})",
            spec.kernel_plus, spec.kernel_minus, dec.dim_plus, dec.dim_minus
        )));
    }
    let (p, m) = (dec.dim_plus, dec.dim_minus);
    let mut m_plus = gaussian_matrix(p, p, rng);
    let mut m_minus = gaussian_matrix(m, m, rng);
    let mut w = gaussian_matrix(m, p, rng) * spec.coupling;
    for j in p - spec.kernel_plus..p {
        m_plus.column_mut(j).fill(0.0);
        w.column_mut(j).fill(0.0);
    }
    for i in m - spec.kernel_minus..m {
        m_minus.column_mut(i).fill(0.0);
        w.row_mut(i).fill(0.0);
    }
    let o_plus = random_orthogonal(p, rng)?;
    let o_minus = random_orthogonal(m, rng)?;
    let a_plus = o_plus.t().dot(&m_plus.t().dot(&m_plus)).dot(&o_plus);
    let a_minus = o_minus.t().dot(&m_minus.t().dot(&m_minus)).dot(&o_minus);
    let w = o_minus.t().dot(&w).dot(&o_plus);
    SaddlePointMatrix::assemble(linalg::symmetrize(&a_plus), linalg::symmetrize(&a_minus), w)
}

/// Random symmetric off-diagonal `R = [[0, Cᵀ], [C, 0]]` with `‖R‖ = norm`.
pub fn random_off_diagonal(dec: BlockDecomposition, norm: f64, rng: &mut impl Rng) -> Matrix {
    let c = gaussian_matrix(dec.dim_minus, dec.dim_plus, rng);
    let scale = linalg::spectral_norm(&c);
    let c = if scale > 0.0 { c * (norm / scale) } else { c };
    let zp = Array2::zeros((dec.dim_plus, dec.dim_plus));
    let zm = Array2::zeros((dec.dim_minus, dec.dim_minus));
    linalg::from_blocks(&zp, &c.t().to_owned(), &c, &zm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{kernel_characterization, spectral_split};

    #[test]
    fn same_seed_same_instance() {
        let spec = InstanceSpec { dim_plus: 5, dim_minus: 4, coupling: 1.0, kernel_plus: 1, kernel_minus: 2 };
        let a = random_saddle_point(&spec, &mut case_rng(7, 3)).unwrap();
        let b = random_saddle_point(&spec, &mut case_rng(7, 3)).unwrap();
        let c = random_saddle_point(&spec, &mut case_rng(7, 4)).unwrap();
        assert_eq!(a.full(), b.full());
        assert_ne!(a.full(), c.full());
    }

    #[test]
    fn engineered_kernels_have_requested_dims() {
        let mut rng = case_rng(1, 0);
        for (kp, km) in [(0, 0), (2, 0), (0, 3), (1, 1)] {
            let spec = InstanceSpec { dim_plus: 6, dim_minus: 7, coupling: 2.0, kernel_plus: kp, kernel_minus: km };
            let b = random_saddle_point(&spec, &mut rng).unwrap();
            let zt = 1e-8 * b.norm();
            let (k_plus, k_minus) = kernel_characterization(&b, zt).unwrap();
            assert_eq!((k_plus.ncols(), k_minus.ncols()), (kp, km));
            assert_eq!(spectral_split(&b, zt).unwrap().kernel_dims(), (kp, km));
        }
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let spec = InstanceSpec { dim_plus: 2, dim_minus: 2, coupling: 1.0, kernel_plus: 3, kernel_minus: 0 };
        assert!(random_saddle_point(&spec, &mut case_rng(0, 0)).is_err());
    }

    #[test]
    fn off_diagonal_has_requested_norm() {
        let dec = BlockDecomposition::new(3, 5).unwrap();
        let r = random_off_diagonal(dec, 42.0, &mut case_rng(2, 0));
        assert!((linalg::spectral_norm(&r) - 42.0).abs() < 1e-10);
        let (d11, d22) = dec.diagonal_blocks(&r);
        assert!(d11.iter().chain(d22.iter()).all(|&v| v == 0.0));
        assert_eq!(linalg::symmetry_defect(&r), 0.0);
    }

    #[test]
    fn drawn_shapes_stay_in_range() {
        let mut rng = case_rng(3, 0);
        for _ in 0..200 {
            let s = InstanceSpec::draw(12, 1.0, &mut rng).unwrap();
            let total = s.dim_plus + s.dim_minus;
            assert!((4..=12).contains(&total));
            assert!(s.dim_plus >= 1 && s.dim_minus >= 1);
            assert!(s.kernel_plus <= s.dim_plus && s.kernel_minus <= s.dim_minus);
        }
        assert!(InstanceSpec::draw(3, 1.0, &mut rng).is_err());
    }
}
