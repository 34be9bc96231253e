use std::f64::consts::FRAC_1_SQRT_2;

use proptest::prelude::*;
use saddle_rotor::blockform::{check_structure, form_bound_beta, involution, j_plus_r_min_abs_eig, BlockDecomposition};
use saddle_rotor::linalg::{self, identity, spectral_norm};
use saddle_rotor::random::{case_rng, gaussian_matrix, random_off_diagonal, random_saddle_point, InstanceSpec};
use saddle_rotor::riccati::{
    fixed_point_identity_defect, graph_reduction_defect, riccati_residual_angular, riccati_residual_operator,
    CouplingSign,
};
use saddle_rotor::spectral::{kernel_split_check, spectral_split_relative, DEFAULT_ZERO_TOL_REL};
use saddle_rotor::subspace::{
    angular_from_projector, block_diagonalize, direct_rotation_closed, direct_rotation_polar, graph_projector,
    operator_angle, principal_angles, skew_generator, AngularOperator,
};
use saddle_rotor::SaddlePointMatrix;

fn instance() -> impl Strategy<Value = (InstanceSpec, u64)> {
    (1usize..12, 1usize..12, 0.05f64..8.0, any::<u64>(), 0usize..3, 0usize..3).prop_map(
        |(p, m, coupling, seed, kp, km)| {
            let spec = InstanceSpec {
                dim_plus: p,
                dim_minus: m,
                coupling,
                kernel_plus: kp.min(p / 2),
                kernel_minus: km.min(m / 2),
            };
            (spec, seed)
        },
    )
}

fn build(spec: &InstanceSpec, seed: u64) -> SaddlePointMatrix {
    random_saddle_point(spec, &mut case_rng(seed, 0)).unwrap()
}

fn contraction(m: usize, p: usize, seed: u64, scale: f64) -> AngularOperator {
    let x = gaussian_matrix(m, p, &mut case_rng(seed, 1));
    let norm = spectral_norm(&x);
    AngularOperator::new(if norm > 0.0 { x * (scale / norm) } else { x })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_subspace_is_graph_of_contraction((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
        let q = split.projector_plus();
        let dist = linalg::projector_distance(&q, &b.dec().plus_projector());
        prop_assert!(dist <= FRAC_1_SQRT_2 + 1e-10, "‖Q − P‖ = {}", dist);
        let x = angular_from_projector(&q, b.dec()).unwrap();
        prop_assert!(x.norm_x <= 1.0 + 1e-9);
        prop_assert!(kernel_split_check(&b, &split).passed);
        prop_assert_eq!(split.kernel_dims(), (spec.kernel_plus, spec.kernel_minus));
    }

    #[test]
    fn angle_routes_agree((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
        let direct = split.angles_to_plus(spec.dim_plus).unwrap();
        let compressed = principal_angles(&b.dec().plus_projector(), &split.projector_plus()).unwrap();
        // The compressed route loses half the digits near zero.
        for (a, c) in direct.iter().zip(compressed.iter()) {
            prop_assert!((a - c).abs() <= 1e-6, "{} vs {}", a, c);
        }
    }

    #[test]
    fn spectral_subspace_reduces_and_is_semidefinite((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
        prop_assert!(split.reduction_defect(&b) <= 1e-10 * b.norm());
        let (min_plus, max_minus) = split.semidefiniteness(&b).unwrap();
        prop_assert!(min_plus >= -split.zero_tol && max_minus <= split.zero_tol);
    }

    #[test]
    fn riccati_forms_agree((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let x = contraction(spec.dim_minus, spec.dim_plus, seed, 0.7);
        let angular = riccati_residual_angular(&b, &x.x).unwrap();
        let operator = riccati_residual_operator(&b, &skew_generator(&x.x)).unwrap();
        prop_assert!((angular - operator).abs() <= 1e-12 * (1.0 + angular));
    }

    #[test]
    fn riccati_solution_has_zero_reduction_defect((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
        let x = angular_from_projector(&split.projector_plus(), b.dec()).unwrap();
        prop_assert!(riccati_residual_angular(&b, &x.x).unwrap() <= 1e-9 * b.norm());
        prop_assert!(graph_reduction_defect(&b, &x).unwrap() <= 1e-9 * b.norm());
    }

    #[test]
    fn rotation_routes_agree_and_diagonalize((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
        let q = split.projector_plus();
        let x = angular_from_projector(&q, b.dec()).unwrap();
        let closed = direct_rotation_closed(&x).unwrap();
        let polar = direct_rotation_polar(&x).unwrap();
        prop_assert!(spectral_norm(&(&closed.u - &polar.u)) <= 1e-10);
        let d = closed.defects(b.dec()).unwrap();
        prop_assert!(d.orthogonality <= 1e-12);
        prop_assert!(d.diagonal_min_eig >= -1e-12);
        prop_assert!(closed.intertwining_defect(&q, b.dec()) <= 1e-10);
        let diag = block_diagonalize(&b, &closed.u).unwrap();
        prop_assert!(diag.off_diag_residual <= 1e-9 * b.norm());
        prop_assert!(diag.min_eig_plus >= -1e-9 * b.norm());
        prop_assert!(diag.min_eig_minus >= -1e-9 * b.norm());
    }

    #[test]
    fn graph_projector_is_orthogonal_projector(
        p in 1usize..9, m in 1usize..9, seed in any::<u64>(), scale in 0.0f64..5.0,
    ) {
        let x = contraction(m, p, seed, scale);
        let (q, q_perp) = graph_projector(&x).unwrap();
        let n = p + m;
        prop_assert!(spectral_norm(&(q.dot(&q) - &q)) <= 1e-12);
        prop_assert!(spectral_norm(&(&q + &q_perp - identity(n))) <= 1e-12);
        let recovered = angular_from_projector(&q, BlockDecomposition::new(p, m).unwrap()).unwrap();
        prop_assert!(spectral_norm(&(&recovered.x - &x.x)) <= 1e-10 * (1.0 + scale * scale));
        // ‖X‖ = tan of the largest angle between H₊ and the graph.
        let angle = operator_angle(&BlockDecomposition::new(p, m).unwrap().plus_projector(), &q).unwrap();
        prop_assert!((angle.max_angle.tan() - x.norm_x).abs() <= 1e-9 * (1.0 + x.norm_x * x.norm_x));
    }

    #[test]
    fn corrected_fixed_point_identity(p in 1usize..9, m in 1usize..9, seed in any::<u64>(), coupling in 0.1f64..4.0) {
        let b = build(&InstanceSpec::kernel_free(p, m, coupling), seed);
        let x = angular_from_projector(
            &spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap().projector_plus(),
            b.dec(),
        ).unwrap();
        prop_assert!(fixed_point_identity_defect(&b, &x.x, CouplingSign::Corrected).unwrap() <= 1e-9);
    }

    #[test]
    fn j_plus_r_avoids_unit_interval(p in 1usize..10, m in 1usize..10, seed in any::<u64>(), log_norm in -3.0f64..2.0) {
        let dec = BlockDecomposition::new(p, m).unwrap();
        let r = random_off_diagonal(dec, 10f64.powf(log_norm), &mut case_rng(seed, 2));
        prop_assert!(j_plus_r_min_abs_eig(&involution(dec), &r).unwrap() >= 1.0 - 1e-10);
    }

    #[test]
    fn structure_and_form_bound((spec, seed) in instance()) {
        let b = build(&spec, seed);
        let s = check_structure(&b);
        prop_assert!(s.diagonal_commutator == 0.0 && s.off_diagonal_anticommutator == 0.0);
        let beta = form_bound_beta(&b).unwrap();
        prop_assert!(beta.is_finite() && beta >= 0.0);
        // |v[x]| ≤ β·(a_J[x] + ‖x‖²) on random vectors.
        let xs = gaussian_matrix(b.dec().total(), 4, &mut case_rng(seed, 3));
        let v = b.off_diagonal_part();
        let abs_a = b.abs_diagonal();
        for col in xs.columns() {
            let lhs = col.dot(&v.dot(&col)).abs();
            let rhs = beta * (col.dot(&abs_a.dot(&col)) + col.dot(&col));
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }
    }
}

#[test]
fn zero_coupling_gives_identity_rotation() {
    let spec = InstanceSpec::kernel_free(4, 3, 0.0);
    let b = build(&spec, 5);
    let split = spectral_split_relative(&b, DEFAULT_ZERO_TOL_REL).unwrap();
    let x = angular_from_projector(&split.projector_plus(), b.dec()).unwrap();
    assert!(x.norm_x <= 1e-12);
    let u = direct_rotation_closed(&x).unwrap().u;
    assert!(spectral_norm(&(u - identity(7))) <= 1e-12);
}
