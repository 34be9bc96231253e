//! Randomized invariant suite.
//!
//! Each case draws a saddle-point matrix from its own seeded stream, so the
//! outcome of case `i` depends only on `(seed, i)`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::blockform::{j_plus_r_gap, SaddlePointMatrix};
use crate::error::Result;
use crate::linalg;
use crate::random::{case_rng, random_saddle_point, InstanceSpec};
use crate::riccati::{fixed_point_identity_defect, riccati_residual_angular, CouplingSign};
use crate::spectral::{kernel_split_check, spectral_split_relative, DEFAULT_ZERO_TOL_REL};
use crate::subspace::{
    angular_from_projector, block_diagonalize, direct_rotation_polar, similarity_identity_residuals,
};

/// Failures beyond this count are tallied but not itemized.
const MAX_RECORDED_FAILURES: usize = 100;

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyOptions {
    pub seed: u64,
    pub cases: usize,
    /// Largest total dimension `dim H₊ + dim H₋`; at least 4.
    pub n_max: usize,
    pub coupling: f64,
    pub sign: CouplingSign,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 42, cases: 100, n_max: 40, coupling: 1.0, sign: CouplingSign::Corrected }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Invariant {
    Contraction,
    KernelSplit,
    BlockDiagonal,
    SpectrumMatch,
    RiccatiResidual,
    RotationCrossCheck,
    SimilarityIdentity,
    FixedPointIdentity,
    JPlusRGap,
    /// A case that could not be evaluated at all.
    Evaluation,
}

impl Invariant {
    pub const ALL: [Invariant; 10] = [
        Invariant::Contraction,
        Invariant::KernelSplit,
        Invariant::BlockDiagonal,
        Invariant::SpectrumMatch,
        Invariant::RiccatiResidual,
        Invariant::RotationCrossCheck,
        Invariant::SimilarityIdentity,
        Invariant::FixedPointIdentity,
        Invariant::JPlusRGap,
        Invariant::Evaluation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Invariant::Contraction => "contraction",
            Invariant::KernelSplit => "kernelSplit",
            Invariant::BlockDiagonal => "blockDiagonal",
            Invariant::SpectrumMatch => "spectrumMatch",
            Invariant::RiccatiResidual => "riccatiResidual",
            Invariant::RotationCrossCheck => "rotationCrossCheck",
            Invariant::SimilarityIdentity => "similarityIdentity",
            Invariant::FixedPointIdentity => "fixedPointIdentity",
            Invariant::JPlusRGap => "jPlusRGap",
            Invariant::Evaluation => "evaluation",
        }
    }

    /// Whether `value` must stay below (`true`) or above (`false`) the limit.
    fn is_upper(self) -> bool {
        !matches!(self, Invariant::JPlusRGap)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub invariant: Invariant,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl CheckResult {
    fn upper(invariant: Invariant, value: f64, limit: f64) -> Self {
        Self { invariant, value, limit, passed: value <= limit }
    }

    fn lower(invariant: Invariant, value: f64, limit: f64) -> Self {
        Self { invariant, value, limit, passed: value >= limit }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseOutcome {
    pub index: usize,
    pub spec: InstanceSpec,
    pub checks: Vec<CheckResult>,
    pub error: Option<String>,
}

/// Evaluates every invariant on one instance.
pub fn check_instance(b: &SaddlePointMatrix, spec: &InstanceSpec, sign: CouplingSign) -> Result<Vec<CheckResult>> {
    let dec = b.dec();
    let split = spectral_split_relative(b, DEFAULT_ZERO_TOL_REL)?;
    let b_norm = b.norm();
    let q = split.projector_plus();
    let mut checks = Vec::new();

    let distance = linalg::projector_distance(&q, &dec.plus_projector());
    checks.push(CheckResult::upper(Invariant::Contraction, distance, FRAC_1_SQRT_2 + 1e-10));

    let kernel = kernel_split_check(b, &split);
    let dims_match = split.kernel_dims() == (spec.kernel_plus, spec.kernel_minus);
    let kernel_value = if kernel.passed && dims_match { 0.0 } else { 1.0 };
    checks.push(CheckResult::upper(Invariant::KernelSplit, kernel_value, 0.0));

    let x = angular_from_projector(&q, dec)?;
    let rotation = direct_rotation_polar(&x);
    let rotation_value = match &rotation {
        Ok(r) => {
            let d = r.defects(dec)?;
            d.orthogonality.max(-d.diagonal_min_eig).max(r.intertwining_defect(&q, dec))
        }
        Err(_) => f64::INFINITY,
    };
    checks.push(CheckResult::upper(Invariant::RotationCrossCheck, rotation_value, 1e-9));

    if let Ok(r) = rotation {
        let diag = block_diagonalize(b, &r.u)?;
        checks.push(CheckResult::upper(Invariant::BlockDiagonal, diag.off_diag_residual, 1e-9 * b_norm));
        let mut combined = diag.combined_spectrum()?;
        combined.sort_by(f64::total_cmp);
        let mismatch = combined
            .iter()
            .zip(split.eigenvalues.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        checks.push(CheckResult::upper(Invariant::SpectrumMatch, mismatch, 1e-9));
    }

    let residual = riccati_residual_angular(b, &x.x)?;
    checks.push(CheckResult::upper(Invariant::RiccatiResidual, residual, 1e-9 * b_norm));

    let similarity = similarity_identity_residuals(b, &x)?.max();
    checks.push(CheckResult::upper(Invariant::SimilarityIdentity, similarity, 1e-9 * b_norm));

    // The identity needs A₊ ≻ 0; a smallest eigenvalue inside the kernel
    // threshold counts as singular, as it does for the split itself.
    let min_eig_plus = linalg::eigvalsh(b.a_plus())?.iter().copied().fold(f64::INFINITY, f64::min);
    if spec.kernel_plus == 0 && min_eig_plus > split.zero_tol {
        let defect = fixed_point_identity_defect(b, &x.x, sign)?;
        checks.push(CheckResult::upper(Invariant::FixedPointIdentity, defect, 1e-9));
    }

    let gap = j_plus_r_gap(b)?.min_abs_eig;
    checks.push(CheckResult::lower(Invariant::JPlusRGap, gap, 1.0 - 1e-10));
    Ok(checks)
}

/// Draws and checks case `index`.
pub fn run_case(opts: &VerifyOptions, index: usize) -> CaseOutcome {
    let mut rng = case_rng(opts.seed, index as u64);
    let outcome = InstanceSpec::draw(opts.n_max, opts.coupling, &mut rng).and_then(|spec| {
        let b = random_saddle_point(&spec, &mut rng)?;
        Ok((spec, check_instance(&b, &spec, opts.sign)))
    });
    match outcome {
        Ok((spec, Ok(checks))) => CaseOutcome { index, spec, checks, error: None },
        Ok((spec, Err(e))) => CaseOutcome { index, spec, checks: Vec::new(), error: Some(e.to_string()) },
        Err(e) => CaseOutcome {
            index,
            spec: InstanceSpec::kernel_free(0, 0, opts.coupling),
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InvariantTally {
    pub invariant: Invariant,
    pub passed: usize,
    pub failed: usize,
    /// Largest value for upper-bounded invariants, smallest for lower-bounded.
    pub worst: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Failure {
    pub case: usize,
    pub invariant: Invariant,
    pub value: Option<f64>,
    pub limit: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifySummary {
    pub options: VerifyOptions,
    pub tallies: Vec<InvariantTally>,
    pub failures: Vec<Failure>,
    pub total_failures: usize,
    pub all_passed: bool,
}

impl VerifySummary {
    pub fn tally(&self, invariant: Invariant) -> &InvariantTally {
        self.tallies.iter().find(|t| t.invariant == invariant).expect("every invariant is tallied")
    }
}

/// Runs `opts.cases` cases in index order.
pub fn run_suite(opts: &VerifyOptions) -> VerifySummary {
    let mut tallies: Vec<InvariantTally> = Invariant::ALL
        .iter()
        .map(|&invariant| InvariantTally { invariant, passed: 0, failed: 0, worst: None })
        .collect();
    let mut failures = Vec::new();
    let mut total_failures = 0;
    let mut record = |f: Failure, failures: &mut Vec<Failure>| {
        total_failures += 1;
        if failures.len() < MAX_RECORDED_FAILURES {
            failures.push(f);
        }
    };
    for index in 0..opts.cases {
        let outcome = run_case(opts, index);
        let eval = tallies.iter_mut().find(|t| t.invariant == Invariant::Evaluation).expect("tallied");
        if let Some(detail) = outcome.error {
            eval.failed += 1;
            record(
                Failure { case: index, invariant: Invariant::Evaluation, value: None, limit: None, detail: Some(detail) },
                &mut failures,
            );
            continue;
        }
        eval.passed += 1;
        for check in outcome.checks {
            let tally = tallies.iter_mut().find(|t| t.invariant == check.invariant).expect("tallied");
            tally.worst = Some(match tally.worst {
                None => check.value,
                Some(w) if check.invariant.is_upper() => w.max(check.value),
                Some(w) => w.min(check.value),
            });
            if check.passed {
                tally.passed += 1;
            } else {
                tally.failed += 1;
                record(
                    Failure {
                        case: index,
                        invariant: check.invariant,
                        value: Some(check.value),
                        limit: Some(check.limit),
                        detail: None,
                    },
                    &mut failures,
                );
            }
        }
    }
    VerifySummary { options: *opts, tallies, failures, total_failures, all_passed: total_failures == 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let opts = VerifyOptions { cases: 20, n_max: 16, ..Default::default() };
        let summary = run_suite(&opts);
        assert!(summary.all_passed, "{:?}", summary.failures);
        assert_eq!(summary.tally(Invariant::Evaluation).passed, 20);
        assert_eq!(summary.tally(Invariant::Contraction).passed, 20);
    }

    #[test]
    fn suite_is_deterministic() {
        let opts = VerifyOptions { cases: 5, n_max: 10, seed: 9, ..Default::default() };
        let a = serde_json::to_string(&run_suite(&opts)).unwrap();
        let b = serde_json::to_string(&run_suite(&opts)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn printed_sign_fails_fixed_point_identity() {
        let opts = VerifyOptions { cases: 10, n_max: 12, sign: CouplingSign::Printed, ..Default::default() };
        let summary = run_suite(&opts);
        assert!(summary.tally(Invariant::FixedPointIdentity).failed > 0);
        assert!(!summary.all_passed);
        assert_eq!(summary.tally(Invariant::Contraction).failed, 0);
    }

    #[test]
    fn zero_cases_is_vacuous() {
        let summary = run_suite(&VerifyOptions { cases: 0, ..Default::default() });
        assert!(summary.all_passed);
        assert!(summary.tallies.iter().all(|t| t.passed == 0 && t.failed == 0));
    }
}
