//! Operator relations forced by Bob's fifth question, and the Schmidt
//! partition they induce.

use serde::Serialize;

use crate::analysis::schmidt::{
    match_multisets, multiset_difference, multiset_union, schmidt, schmidt_unnormalized, MultisetMatch,
    SchmidtSpectrum, MULTISET_REL_TOL, ZERO_CUTOFF,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::strategy::{Side, Strategy};

/// Residual norms of the relations between Alice's questions 0, 2 and
/// Bob's question 4. All vanish for the ideal construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Y4Report {
    /// `‖Π_{A_0}^0 ψ − Π_{B_4}^0 ψ‖`
    pub a0_b4_answer0: f64,
    /// `‖Π_{A_0}^0 ψ − (Π_{A_2}^2 + Π_{A_2}^0) ψ‖`
    pub a0_a2_answer0: f64,
    /// `‖Π_{A_0}^1 ψ − Π_{B_4}^1 ψ‖`
    pub a0_b4_answer1: f64,
    /// `‖Π_{A_0}^1 ψ − Π_{A_2}^1 ψ‖`
    pub a0_a2_answer1: f64,
    /// `‖ψ − Π_{A_0}^0⊗Π_{B_4}^0 ψ − Π_{A_0}^1⊗Π_{B_4}^1 ψ‖`
    pub diagonal_support: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Y4Report {
    pub fn residuals(&self) -> [(&'static str, f64); 5] {
        [
            ("a0_b4_answer0", self.a0_b4_answer0),
            ("a0_a2_answer0", self.a0_a2_answer0),
            ("a0_b4_answer1", self.a0_b4_answer1),
            ("a0_a2_answer1", self.a0_a2_answer1),
            ("diagonal_support", self.diagonal_support),
        ]
    }

    /// Name and value of the largest residual.
    pub fn worst(&self) -> (&'static str, f64) {
        self.residuals()
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty")
    }
}

fn check_shape(s: &Strategy) -> Result<()> {
    let (m, n) = s.questions();
    let (r, t) = s.answers();
    if m != 4 || n != 5 || r != 3 || t != 3 {
        return Err(Error::Shape(format!(
            "expected 4×5 questions with 3 answers each, got {m}×{n} questions and {r}×{t} answers"
        )));
    }
    Ok(())
}

fn both_sides(s: &Strategy, x: usize, a: usize, y: usize, b: usize) -> CVec {
    linalg::apply_local(s.element(Side::A, x, a), s.element(Side::B, y, b), s.state())
}

pub fn verify_y4_relations(s: &Strategy, tol: f64) -> Result<Y4Report> {
    check_shape(s)?;
    let alice = |x: usize, answers: &[usize]| s.projected_substate(Side::A, x, answers);
    let bob = |y: usize, answers: &[usize]| s.projected_substate(Side::B, y, answers);
    let a00 = alice(0, &[0])?;
    let a01 = alice(0, &[1])?;
    let diag = both_sides(s, 0, 0, 4, 0) + both_sides(s, 0, 1, 4, 1);
    let mut report = Y4Report {
        a0_b4_answer0: (&a00 - bob(4, &[0])?).norm(),
        a0_a2_answer0: (&a00 - alice(2, &[2, 0])?).norm(),
        a0_b4_answer1: (&a01 - bob(4, &[1])?).norm(),
        a0_a2_answer1: (&a01 - alice(2, &[1])?).norm(),
        diagonal_support: (s.state() - diag).norm(),
        tol,
        passed: false,
    };
    report.passed = report.residuals().iter().all(|(_, r)| *r <= tol);
    Ok(report)
}

/// Spectra of the state and of its pieces singled out by the relations.
#[derive(Debug, Clone, Serialize)]
pub struct SchmidtPartition {
    /// `Schmidt(ψ)`
    pub whole: SchmidtSpectrum,
    /// `Schmidt(Π_{A_0}^0 ⊗ Π_{B_4}^0 ψ)`
    pub s0: SchmidtSpectrum,
    /// `Schmidt(Π_{A_0}^1 ⊗ Π_{B_4}^1 ψ)`
    pub s1: SchmidtSpectrum,
    /// `Schmidt(Π_{A_2}^2 ⊗ Π_{B_2}^2 ψ)`
    pub s2: SchmidtSpectrum,
    /// `S` against `S0 ⊔ S1`.
    pub union_match: MultisetMatch,
    /// `S2` against `S0`; every element of `S2` is paired.
    pub s2_in_s0: MultisetMatch,
}

/// Splits the Schmidt spectrum of the state along the answers of Alice's
/// question 0. Requires the y=4 relations at `tol`; `tol` is also the
/// relative tolerance of the multiset checks.
pub fn schmidt_partition(s: &Strategy, tol: f64) -> Result<SchmidtPartition> {
    let rel = verify_y4_relations(s, tol)?;
    if !rel.passed {
        let (name, value) = rel.worst();
        return Err(Error::residual(format!("y=4 relation {name}"), value, tol));
    }
    let (d_a, d_b) = s.dims();
    let spec = |v: &CVec| schmidt_unnormalized(v, d_a, d_b, ZERO_CUTOFF).map(|d| d.spectrum);
    let whole = schmidt(s.state(), d_a, d_b, ZERO_CUTOFF)?.spectrum;
    let s0 = spec(&both_sides(s, 0, 0, 4, 0))?;
    let s1 = spec(&both_sides(s, 0, 1, 4, 1))?;
    let s2 = spec(&both_sides(s, 2, 2, 2, 2))?;
    let rel_tol = tol.max(MULTISET_REL_TOL);
    let union_match = match_multisets(&whole.coefficients, &multiset_union(&s0.coefficients, &s1.coefficients), rel_tol);
    if !union_match.is_exact() {
        return Err(Error::Multiset(format!(
            "S differs from S0 ⊔ S1: {:?} vs {:?}",
            union_match.unmatched_left, union_match.unmatched_right
        )));
    }
    let s2_in_s0 = match_multisets(&s0.coefficients, &s2.coefficients, rel_tol);
    if !s2_in_s0.unmatched_right.is_empty() {
        return Err(Error::Multiset(format!("S2 elements {:?} missing from S0", s2_in_s0.unmatched_right)));
    }
    Ok(SchmidtPartition { whole, s0, s1, s2, union_match, s2_in_s0 })
}

/// The two correspondences `S1 = α·S0` and `S0 \ S2 = α·S1`. A truncated
/// state breaks the second one at its last coefficient, which is reported
/// in `boundary` and left out of the comparison.
#[derive(Debug, Clone, Serialize)]
pub struct BijectionReport {
    pub alpha: f64,
    pub s1_vs_alpha_s0: MultisetMatch,
    pub s0_minus_s2_vs_alpha_s1: MultisetMatch,
    /// Smallest element of `S1`, excluded from the second comparison.
    pub boundary: Option<f64>,
    pub max_abs_diff: f64,
    pub passed: bool,
}

pub fn check_bijections(part: &SchmidtPartition, alpha: f64, tol: f64) -> Result<BijectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
    }
    let rel_tol = tol.max(MULTISET_REL_TOL);
    let s0 = &part.s0.coefficients;
    let s1 = &part.s1.coefficients;
    let first = match_multisets(s1, &part.s0.scaled(alpha).coefficients, rel_tol);
    let s0_minus_s2 = multiset_difference(s0, &part.s2.coefficients, rel_tol)?;
    // s1 is descending, so the boundary coefficient is its last entry
    let boundary = s1.last().copied();
    let kept = &s1[..s1.len().saturating_sub(1)];
    let scaled: Vec<f64> = kept.iter().map(|l| alpha * l).collect();
    let second = match_multisets(&s0_minus_s2, &scaled, rel_tol);
    let max_abs_diff = first.max_abs_diff.max(second.max_abs_diff);
    let passed = first.is_exact() && second.is_exact() && max_abs_diff <= tol;
    Ok(BijectionReport { alpha, s1_vs_alpha_s0: first, s0_minus_s2_vs_alpha_s1: second, boundary, max_abs_diff, passed })
}
