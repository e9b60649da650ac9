//! The separating correlation `p*` on 4 × 5 questions and 3 × 3 answers.
//!
//! The ideal strategy lives on `ℓ²(ℕ) ⊗ ℓ²(ℕ)` with state
//! `√(1−α²) Σ_i α^i |ii⟩`. Questions 0, 1 (and Bob's 4) apply tilted CHSH
//! observables on the pairs `(2m, 2m+1)`; questions 2, 3 apply them on the
//! shifted pairs `(2m+1, 2m+2)` and route `|0⟩` to answer 2.
//!
//! Two evaluations are provided: [`ideal_truncated_strategy`] cuts the
//! construction at dimension `D = 2M`, and [`exact_pstar`] sums the infinite
//! series in closed form using the 2-periodic banded structure of every
//! measurement element.

use serde::Serialize;

use crate::correlation::{BlockLayout, Correlation, CorrelationTable, Metric};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::strategy::{AnswerRouting, Observable, Strategy};
use crate::tilted_chsh::{self, params_from_alpha, TiltedChshParams};

pub const ALICE_QUESTIONS: usize = 4;
pub const BOB_QUESTIONS: usize = 5;
pub const ANSWERS: usize = 3;

/// Truncation of the ideal strategy to the first `D = 2M` basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationSpec {
    pub alpha: f64,
    pub blocks: usize,
}

impl TruncationSpec {
    pub fn new(alpha: f64, blocks: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if blocks < 2 {
            return Err(Error::param("m", format!("need at least 2 blocks, got {blocks}")));
        }
        Ok(TruncationSpec { alpha, blocks })
    }

    /// Local dimension `D = 2M`.
    pub fn dimension(&self) -> usize {
        2 * self.blocks
    }

    /// `√((1−α²)/(1−α^{2D}))`, the amplitude of `|00⟩` after renormalizing.
    pub fn normalization(&self) -> f64 {
        let a2 = self.alpha * self.alpha;
        ((1.0 - a2) / (1.0 - self.alpha.powi(2 * self.dimension() as i32))).sqrt()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `|0⟩ ↦ |2m⟩, |1⟩ ↦ |2m+1⟩`
    Even,
    /// `|0⟩ ↦ |2m+1⟩, |1⟩ ↦ |2m+2⟩`
    Odd,
}

/// Isometry `ℂ² → ℂ^D` placing a qubit on one pair of basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairIsometry {
    pub kind: Pairing,
    pub block: usize,
}

impl PairIsometry {
    pub fn even(block: usize) -> Self {
        PairIsometry { kind: Pairing::Even, block }
    }

    pub fn odd(block: usize) -> Self {
        PairIsometry { kind: Pairing::Odd, block }
    }

    pub fn indices(&self) -> (usize, usize) {
        match self.kind {
            Pairing::Even => (2 * self.block, 2 * self.block + 1),
            Pairing::Odd => (2 * self.block + 1, 2 * self.block + 2),
        }
    }

    /// `V O V†` as a `dim × dim` matrix.
    pub fn pushforward(&self, op: &CMat, dim: usize) -> Result<CMat> {
        let (i, j) = self.indices();
        if j >= dim {
            return Err(Error::Shape(format!("pair ({i}, {j}) does not fit in dimension {dim}")));
        }
        let mut out = linalg::zeros(dim);
        let idx = [i, j];
        for (r, &gr) in idx.iter().enumerate() {
            for (c, &gc) in idx.iter().enumerate() {
                out[(gr, gc)] = op[(r, c)];
            }
        }
        Ok(out)
    }
}

/// Local qubit observable applied on every pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LocalObservable {
    Z,
    X,
    AlphaZ,
    AlphaX,
}

impl LocalObservable {
    fn matrix(self, p: &TiltedChshParams) -> CMat {
        match self {
            LocalObservable::Z => tilted_chsh::sigma_z(),
            LocalObservable::X => tilted_chsh::sigma_x(),
            LocalObservable::AlphaZ => p.sigma_alpha_z(),
            LocalObservable::AlphaX => p.sigma_alpha_x(),
        }
    }

    /// `(I ± O)/2` as a real 2×2 array; `sign = +1` gives the `+1` eigenprojector.
    fn eigenprojector(self, p: &TiltedChshParams, sign: f64) -> [[f64; 2]; 2] {
        let o = self.matrix(p);
        let mut out = [[0.0; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let id = if r == c { 1.0 } else { 0.0 };
                *v = 0.5 * (id + sign * o[(r, c)].re);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct QuestionSpec {
    pairing: Pairing,
    local: LocalObservable,
}

const ALICE: [QuestionSpec; ALICE_QUESTIONS] = [
    QuestionSpec { pairing: Pairing::Even, local: LocalObservable::Z },
    QuestionSpec { pairing: Pairing::Even, local: LocalObservable::X },
    QuestionSpec { pairing: Pairing::Odd, local: LocalObservable::Z },
    QuestionSpec { pairing: Pairing::Odd, local: LocalObservable::X },
];

const BOB: [QuestionSpec; BOB_QUESTIONS] = [
    QuestionSpec { pairing: Pairing::Even, local: LocalObservable::AlphaZ },
    QuestionSpec { pairing: Pairing::Even, local: LocalObservable::AlphaX },
    QuestionSpec { pairing: Pairing::Odd, local: LocalObservable::AlphaZ },
    QuestionSpec { pairing: Pairing::Odd, local: LocalObservable::AlphaX },
    QuestionSpec { pairing: Pairing::Even, local: LocalObservable::Z },
];

fn routing(pairing: Pairing) -> AnswerRouting {
    match pairing {
        Pairing::Even => AnswerRouting::binary(0, 1),
        // shifted blocks: +1 → answer 1, −1 → answer 0, |0⟩ → answer 2
        Pairing::Odd => AnswerRouting::ternary(1, 0, 2),
    }
}

/// Observable of one question on `ℂ^D`. For the shifted pairing the
/// dangling vector `|D−1⟩ = V_odd^{M−1}|0⟩` is given eigenvalue `+1`, which
/// routes it to answer 1 and keeps the measurement complete.
fn truncated_observable(q: QuestionSpec, p: &TiltedChshParams, spec: &TruncationSpec) -> Result<Observable> {
    let d = spec.dimension();
    let local = q.local.matrix(p);
    let mut o = linalg::zeros(d);
    match q.pairing {
        Pairing::Even => {
            for m in 0..spec.blocks {
                o += PairIsometry::even(m).pushforward(&local, d)?;
            }
        }
        Pairing::Odd => {
            for m in 0..spec.blocks - 1 {
                o += PairIsometry::odd(m).pushforward(&local, d)?;
            }
            o[(d - 1, d - 1)] = linalg::ONE;
        }
    }
    Observable::new(o)
}

/// Ideal strategy for `p*` cut at dimension `D = 2M` with the state
/// renormalized to `N Σ_{i<D} α^i |ii⟩`.
pub fn ideal_truncated_strategy(spec: &TruncationSpec) -> Result<Strategy> {
    let spec = TruncationSpec::new(spec.alpha, spec.blocks)?;
    let p = params_from_alpha(spec.alpha)?;
    let d = spec.dimension();
    let norm = spec.normalization();
    let mut state = CVec::zeros(d * d);
    for i in 0..d {
        state[i * d + i] = linalg::re(norm * spec.alpha.powi(i as i32));
    }
    let side = |qs: &[QuestionSpec]| -> Result<Vec<Vec<CMat>>> {
        qs.iter()
            .map(|&q| truncated_observable(q, &p, &spec)?.to_projectors(routing(q.pairing), ANSWERS))
            .collect()
    };
    Strategy::new(d, d, state, side(&ALICE)?, side(&BOB)?)
}

/// Matrix entries `⟨i|Π|j⟩` of one measurement element of the infinite
/// ideal strategy.
#[derive(Debug, Clone, Copy)]
enum InfiniteElement {
    Zero,
    /// `|0⟩⟨0|`
    Vacuum,
    Periodic { pairing: Pairing, local: [[f64; 2]; 2] },
}

impl InfiniteElement {
    fn entry(&self, i: usize, j: usize) -> f64 {
        match *self {
            InfiniteElement::Zero => 0.0,
            InfiniteElement::Vacuum => f64::from(u8::from(i == 0 && j == 0)),
            InfiniteElement::Periodic { pairing: Pairing::Even, local } => {
                if i / 2 == j / 2 {
                    local[i % 2][j % 2]
                } else {
                    0.0
                }
            }
            InfiniteElement::Periodic { pairing: Pairing::Odd, local } => {
                if i == 0 || j == 0 || (i - 1) / 2 != (j - 1) / 2 {
                    0.0
                } else {
                    local[(i - 1) % 2][(j - 1) % 2]
                }
            }
        }
    }
}

fn infinite_elements(q: QuestionSpec, p: &TiltedChshParams) -> [InfiniteElement; ANSWERS] {
    let plus = InfiniteElement::Periodic { pairing: q.pairing, local: q.local.eigenprojector(p, 1.0) };
    let minus = InfiniteElement::Periodic { pairing: q.pairing, local: q.local.eigenprojector(p, -1.0) };
    match q.pairing {
        Pairing::Even => [plus, minus, InfiniteElement::Zero],
        Pairing::Odd => [minus, plus, InfiniteElement::Vacuum],
    }
}

/// `Σ_{i,j} α^{i+j} P_ij Q_ij` over `ℕ × ℕ`. Only `|i − j| ≤ 1` contributes.
/// Every element is invariant under the shift `(i, j) → (i+2, j+2)` once
/// `i, j ≥ 1`, so the sum is the boundary terms touching index 0 plus one
/// period `min(i, j) ∈ {1, 2}` scaled by `1/(1 − α⁴)`.
fn series(alpha: f64, a: &InfiniteElement, b: &InfiniteElement) -> f64 {
    let term = |i: usize, j: usize| alpha.powi((i + j) as i32) * a.entry(i, j) * b.entry(i, j);
    let boundary = term(0, 0) + term(0, 1) + term(1, 0);
    let period: f64 = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2)]
        .iter()
        .map(|&(i, j)| term(i, j))
        .sum();
    boundary + period / (1.0 - alpha.powi(4))
}

/// `p*` evaluated in closed form. `tol` bounds the per-table normalization
/// error accepted from rounding.
pub fn exact_pstar(alpha: f64, tol: f64) -> Result<Correlation> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let p = params_from_alpha(alpha)?;
    let scale = 1.0 - alpha * alpha;
    let alice: Vec<_> = ALICE.iter().map(|&q| infinite_elements(q, &p)).collect();
    let bob: Vec<_> = BOB.iter().map(|&q| infinite_elements(q, &p)).collect();
    let mut table = Vec::with_capacity(ALICE_QUESTIONS * BOB_QUESTIONS * ANSWERS * ANSWERS);
    for ax in &alice {
        for by in &bob {
            for ea in ax {
                for eb in by {
                    table.push(scale * series(alpha, ea, eb));
                }
            }
        }
    }
    Correlation::with_tolerance(ALICE_QUESTIONS, BOB_QUESTIONS, ANSWERS, ANSWERS, table, tol)
}

/// Two-qubit tilted CHSH table for ratio `α` on questions `(x, y) ∈ {0,1}²`,
/// from the eigenvectors of the rotated Paulis: `p(a,b) = (c₀ u_a⁰ v_b⁰ + c₁ u_a¹ v_b¹)²`
/// with `c = (1, α)/√(1+α²)`.
pub fn chsh_table(alpha: f64, x: usize, y: usize) -> [[f64; 2]; 2] {
    let p = params_from_alpha(alpha).expect("alpha in [0, 1]");
    let phi_a = if x == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    let phi_b = if y == 0 { p.mu } else { -p.mu };
    // eigenvectors of cos φ σ^z + sin φ σ^x
    let eig = |phi: f64| {
        let (s, c) = (0.5 * phi).sin_cos();
        [[c, s], [-s, c]]
    };
    let (u, v) = (eig(phi_a), eig(phi_b));
    let norm = (1.0 + alpha * alpha).sqrt();
    let (c0, c1) = (1.0 / norm, alpha / norm);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let amp = c0 * u[a][0] * v[b][0] + c1 * u[a][1] * v[b][1];
            out[a][b] = amp * amp;
        }
    }
    out
}

/// `C = 1/(1 − α²)`.
pub fn c_constant(alpha: f64) -> f64 {
    1.0 / (1.0 - alpha * alpha)
}

/// Question pairs whose tables have printed closed forms.
pub fn printed_pairs() -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            pairs.push((x, y));
        }
    }
    for x in 2..4 {
        for y in 2..4 {
            pairs.push((x, y));
        }
    }
    pairs.push((0, 4));
    pairs.push((2, 4));
    pairs
}

/// Closed-form table for one of the printed question pairs.
pub fn printed_table(alpha: f64, x: usize, y: usize) -> Result<CorrelationTable> {
    check_alpha(alpha)?;
    let c = c_constant(alpha);
    let a2 = alpha * alpha;
    let a4 = a2 * a2;
    let mut t = vec![vec![0.0; ANSWERS]; ANSWERS];
    match (x, y) {
        (0..=1, 0..=1) => {
            let chsh = chsh_table(alpha, x, y);
            for a in 0..2 {
                for b in 0..2 {
                    t[a][b] = chsh[a][b];
                }
            }
        }
        (2..=3, 2..=3) => {
            // 0 and 1 labels flipped relative to the CHSH table
            let chsh = chsh_table(alpha, x % 2, y % 2);
            for a in 0..2 {
                for b in 0..2 {
                    t[a][b] = (c - 1.0) / c * chsh[1 - a][1 - b];
                }
            }
            t[2][2] = 1.0 / c;
        }
        (0, 4) => {
            t[0][0] = 1.0 / c / (1.0 - a4);
            t[1][1] = 1.0 / c * a2 / (1.0 - a4);
        }
        (2, 4) => {
            t[0][0] = 1.0 / c * (1.0 / (1.0 - a4) - 1.0);
            t[1][1] = 1.0 / c * a2 / (1.0 - a4);
            t[2][0] = 1.0 / c;
        }
        _ => {
            return Err(Error::param("pair", format!("no printed table for questions ({x}, {y})")));
        }
    }
    CorrelationTable::new(x, y, t)
}

/// Distance between `p*` and the correlation of the truncation with `M`
/// blocks.
pub fn truncation_distance(alpha: f64, blocks: usize, metric: Metric) -> Result<f64> {
    let spec = TruncationSpec::new(alpha, blocks)?;
    let truncated = ideal_truncated_strategy(&spec)?.induce()?;
    exact_pstar(alpha, 1e-12)?.distance(&truncated, metric)
}

/// Answer partition `({0,1}, {2})` on both sides.
pub fn pstar_layout() -> BlockLayout {
    BlockLayout::new(vec![vec![0, 1], vec![2]], vec![vec![0, 1], vec![2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::block_structure_check;
    use crate::strategy::Side;

    #[test]
    fn spec_validation() {
        assert!(TruncationSpec::new(0.0, 4).is_err());
        assert!(TruncationSpec::new(1.0, 4).is_err());
        assert!(TruncationSpec::new(0.5, 1).is_err());
        assert_eq!(TruncationSpec::new(0.5, 3).unwrap().dimension(), 6);
    }

    #[test]
    fn pair_isometries() {
        assert_eq!(PairIsometry::even(2).indices(), (4, 5));
        assert_eq!(PairIsometry::odd(2).indices(), (5, 6));
        let z = tilted_chsh::sigma_z();
        assert!(PairIsometry::odd(2).pushforward(&z, 6).is_err());
        let v = PairIsometry::even(1).pushforward(&z, 4).unwrap();
        assert_eq!(v[(2, 2)].re, 1.0);
        assert_eq!(v[(3, 3)].re, -1.0);
    }

    #[test]
    fn truncated_strategy_is_valid_and_complete() {
        for blocks in [2, 3, 8] {
            let s = ideal_truncated_strategy(&TruncationSpec::new(0.5, blocks).unwrap()).unwrap();
            assert!(s.validate().is_valid(), "M={blocks}: {:?}", s.validate());
            assert_eq!(s.questions(), (4, 5));
            assert_eq!(s.answers(), (3, 3));
        }
    }

    #[test]
    fn answer_two_projector_is_vacuum() {
        let s = ideal_truncated_strategy(&TruncationSpec::new(0.5, 3).unwrap()).unwrap();
        for x in 2..4 {
            let p = s.element(Side::A, x, 2);
            assert!(linalg::frobenius(&(p - linalg::basis_projector(6, 0))) < 1e-12);
        }
        // dangling vector |5⟩ sits in answer 1 for both shifted questions
        for x in 2..4 {
            assert!((s.element(Side::A, x, 1)[(5, 5)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn renormalized_vacuum_weight() {
        let spec = TruncationSpec::new(0.5, 8).unwrap();
        let p = ideal_truncated_strategy(&spec).unwrap().induce().unwrap();
        let expected = 0.75 / (1.0 - 0.5f64.powi(32));
        assert!((p.get(2, 2, 2, 2) - expected).abs() < 1e-14);
    }

    #[test]
    fn printed_values_at_half() {
        let t = printed_table(0.5, 0, 4).unwrap();
        assert!((t.get(0, 0) - 0.8).abs() < 1e-15 && (t.get(1, 1) - 0.2).abs() < 1e-15);
        let t = printed_table(0.5, 2, 4).unwrap();
        assert!((t.get(0, 0) - 0.05).abs() < 1e-15);
        assert!((t.get(1, 1) - 0.2).abs() < 1e-15);
        assert!((t.get(2, 0) - 0.75).abs() < 1e-15);
        assert!(printed_table(0.5, 0, 2).is_err());
        assert!(printed_table(0.5, 1, 4).is_err());
    }

    #[test]
    fn shifted_tables_are_weighted_flipped_chsh() {
        for (x, y) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let t = printed_table(0.5, x, y).unwrap();
            let chsh = chsh_table(0.5, x % 2, y % 2);
            assert!((t.get(0, 0) - 0.25 * chsh[1][1]).abs() < 1e-15);
            assert!((t.get(1, 0) - 0.25 * chsh[0][1]).abs() < 1e-15);
            assert!((t.get(2, 2) - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_matches_printed_tables() {
        for alpha in [0.3, 0.5, 0.7] {
            let p = exact_pstar(alpha, 1e-12).unwrap();
            for (x, y) in printed_pairs() {
                let d = p.table(x, y).max_abs_diff(&printed_table(alpha, x, y).unwrap());
                assert!(d < 1e-12, "alpha {alpha} ({x},{y}): {d:e}");
            }
        }
    }

    #[test]
    fn exact_spot_values() {
        let p = exact_pstar(0.5, 1e-12).unwrap();
        assert!((p.get(0, 4, 0, 0) - 0.8).abs() < 1e-14);
        assert!((p.get(0, 4, 1, 1) - 0.2).abs() < 1e-14);
        assert!((p.get(2, 4, 2, 0) - 0.75).abs() < 1e-14);
        assert!((p.get(2, 4, 0, 0) - 0.05).abs() < 1e-14);
        assert!((p.get(2, 4, 1, 1) - 0.2).abs() < 1e-14);
        for x in 0..2 {
            for y in 0..2 {
                for k in 0..3 {
                    assert_eq!(p.get(x, y, 2, k), 0.0);
                    assert_eq!(p.get(x, y, k, 2), 0.0);
                }
            }
        }
        assert!(exact_pstar(1.0, 1e-12).is_err());
        assert!(exact_pstar(0.5, 0.0).is_err());
    }

    #[test]
    fn ideal_tables_embed_as_questions_zero_one() {
        let p = params_from_alpha(0.5).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let ideal = tilted_chsh::ideal_table(&p, x, y).unwrap();
                let closed = chsh_table(0.5, x, y);
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((ideal.get(a, b) - closed[a][b]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn block_weights_of_restrictions() {
        let spec = TruncationSpec::new(0.5, 8).unwrap();
        let p = ideal_truncated_strategy(&spec).unwrap().induce().unwrap();
        let low = block_structure_check(&p.restrict(&[0, 1], &[0, 1]).unwrap(), &pstar_layout(), 1e-12).unwrap();
        assert!((low.weights[0] - 1.0).abs() < 1e-12 && low.weights[1].abs() < 1e-12);
        assert!(low.blocks[1].is_none());
        let high = block_structure_check(&p.restrict(&[2, 3], &[2, 3]).unwrap(), &pstar_layout(), 1e-12).unwrap();
        assert!((high.weights[0] - 0.25).abs() < 1e-9 && (high.weights[1] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn truncation_distance_decays_geometrically() {
        let mut prev = f64::INFINITY;
        for m in 3..=8 {
            let d = truncation_distance(0.5, m, Metric::MaxTv).unwrap();
            assert!(d > 0.0 && d < prev);
            assert!(d <= 4.0 * 0.5f64.powi(4 * m as i32));
            if prev.is_finite() {
                let ratio = prev / d;
                assert!((8.0..=32.0).contains(&ratio), "M={m}: ratio {ratio}");
            }
            prev = d;
        }
    }
}
