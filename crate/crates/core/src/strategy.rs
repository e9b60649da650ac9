//! Finite-dimensional bipartite strategies: a pure state on `H_A ⊗ H_B` and one
//! projective measurement per question on each side.
//!
//! States use the Alice-major index layout `i * d_b + j` throughout; the
//! Schmidt analysis reshapes vectors assuming it.

use serde::{Deserialize, Serialize};

use crate::correlation::{Correlation, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

pub const STATE_NORM_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const OBSERVABLE_TOL: f64 = 1e-9;
/// Eigenvalue clustering tolerance for observables.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-8;
/// Normalization tolerance applied to induced correlations.
pub const INDUCED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    d_a: usize,
    d_b: usize,
    state: CVec,
    alice: Vec<Vec<CMat>>,
    bob: Vec<Vec<CMat>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    StateNorm,
    NotHermitian,
    NotIdempotent,
    NotOrthogonal,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub side: Option<Side>,
    pub question: Option<usize>,
    /// Answer (or answer pair for orthogonality) the residual refers to.
    pub answers: Vec<usize>,
    pub residual: f64,
    pub tolerance: f64,
}

/// Result of [`Strategy::validate`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .max_by(|a, b| (a.residual / a.tolerance).total_cmp(&(b.residual / b.tolerance)))
    }
}

impl Strategy {
    /// Checks shapes only; use [`Strategy::validate`] for the operator
    /// invariants.
    pub fn new(
        d_a: usize,
        d_b: usize,
        state: CVec,
        alice: Vec<Vec<CMat>>,
        bob: Vec<Vec<CMat>>,
    ) -> Result<Self> {
        if d_a == 0 || d_b == 0 {
            return Err(Error::Shape("local dimensions must be positive".into()));
        }
        if state.len() != d_a * d_b {
            return Err(Error::Shape(format!(
                "state has length {}, expected {}",
                state.len(),
                d_a * d_b
            )));
        }
        check_side(&alice, d_a, "Alice")?;
        check_side(&bob, d_b, "Bob")?;
        Ok(Strategy { d_a, d_b, state, alice, bob })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    pub fn state(&self) -> &CVec {
        &self.state
    }

    pub fn questions(&self) -> (usize, usize) {
        (self.alice.len(), self.bob.len())
    }

    pub fn answers(&self) -> (usize, usize) {
        (self.alice[0].len(), self.bob[0].len())
    }

    pub fn measurements(&self, side: Side) -> &[Vec<CMat>] {
        match side {
            Side::A => &self.alice,
            Side::B => &self.bob,
        }
    }

    pub fn element(&self, side: Side, question: usize, answer: usize) -> &CMat {
        &self.measurements(side)[question][answer]
    }

    pub fn alice(&self) -> &[Vec<CMat>] {
        &self.alice
    }

    pub fn bob(&self) -> &[Vec<CMat>] {
        &self.bob
    }

    /// Coefficient matrix of the state (`d_a × d_b`).
    pub fn coefficients(&self) -> CMat {
        linalg::coefficient_matrix(&self.state, self.d_a, self.d_b)
    }

    pub fn with_state(&self, state: CVec) -> Result<Strategy> {
        Strategy::new(self.d_a, self.d_b, state, self.alice.clone(), self.bob.clone())
    }

    pub fn with_element(&self, side: Side, question: usize, answer: usize, op: CMat) -> Result<Strategy> {
        let mut out = self.clone();
        let meas = match side {
            Side::A => &mut out.alice,
            Side::B => &mut out.bob,
        };
        let slot = meas
            .get_mut(question)
            .and_then(|q| q.get_mut(answer))
            .ok_or_else(|| Error::Shape(format!("no element ({question}, {answer})")))?;
        if slot.shape() != op.shape() {
            return Err(Error::Shape("replacement element has the wrong dimension".into()));
        }
        *slot = op;
        Ok(out)
    }

    pub fn with_measurement(&self, side: Side, question: usize, elements: Vec<CMat>) -> Result<Strategy> {
        let mut out = self.clone();
        let meas = match side {
            Side::A => &mut out.alice,
            Side::B => &mut out.bob,
        };
        if question >= meas.len() {
            return Err(Error::Shape(format!("no question {question}")));
        }
        meas[question] = elements;
        let (d_a, d_b) = (out.d_a, out.d_b);
        check_side(&out.alice, d_a, "Alice")?;
        check_side(&out.bob, d_b, "Bob")?;
        Ok(out)
    }

    /// Reports every invariant violation with its Frobenius-norm residual.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let norm = self.state.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            violations.push(Violation {
                kind: ViolationKind::StateNorm,
                side: None,
                question: None,
                answers: vec![],
                residual: (norm - 1.0).abs(),
                tolerance: STATE_NORM_TOL,
            });
        }
        for (side, meas, d) in [(Side::A, &self.alice, self.d_a), (Side::B, &self.bob, self.d_b)] {
            for (x, elems) in meas.iter().enumerate() {
                validate_measurement(side, x, elems, d, &mut violations);
            }
        }
        ValidationReport { violations }
    }

    /// Correlation `p(a,b|x,y) = ⟨ψ| Π_{A_x}^a ⊗ Π_{B_y}^b |ψ⟩`.
    pub fn induce(&self) -> Result<Correlation> {
        let report = self.validate();
        if let Some(worst) = report.worst() {
            return Err(Error::InvalidStrategy(format!(
                "{:?} on {:?} question {:?} answers {:?}: residual {:e}",
                worst.kind, worst.side, worst.question, worst.answers, worst.residual
            )));
        }
        self.induce_unchecked()
    }

    /// [`Strategy::induce`] without the validity precondition check.
    pub(crate) fn induce_unchecked(&self) -> Result<Correlation> {
        let (m, n) = self.questions();
        let (r, s) = self.answers();
        let psi = self.coefficients();
        let psi_adj = psi.adjoint();
        let mut table = Vec::with_capacity(m * n * r * s);
        // X_{x,a} = Ψ† Π_{A_x}^a Ψ, then p = Σ_{jk} X_{jk} Q_{jk}
        let contracted: Vec<Vec<CMat>> = self
            .alice
            .iter()
            .map(|q| q.iter().map(|p| &psi_adj * p * &psi).collect())
            .collect();
        for xs in &contracted {
            for bq in &self.bob {
                for xa in xs {
                    for qb in bq {
                        let v: num_complex::Complex64 =
                            xa.iter().zip(qb.iter()).map(|(u, w)| u * w).sum();
                        if v.im.abs() > PROJECTOR_TOL {
                            return Err(Error::ImaginaryProbability { value: v.im });
                        }
                        table.push(v.re);
                    }
                }
            }
        }
        Correlation::with_tolerance(m, n, r, s, table, INDUCED_TOL)
    }

    /// `(Σ_{a ∈ answers} Π^a ⊗ I)|ψ⟩` for side A, or the mirrored expression
    /// for side B. Unnormalized.
    pub fn projected_substate(&self, side: Side, question: usize, answers: &[usize]) -> Result<CVec> {
        let op = self.answer_sum(side, question, answers)?;
        Ok(match side {
            Side::A => linalg::apply_local(&op, &linalg::identity(self.d_b), &self.state),
            Side::B => linalg::apply_local(&linalg::identity(self.d_a), &op, &self.state),
        })
    }

    /// `Σ_{a ∈ answers} Π^a` for one question.
    pub fn answer_sum(&self, side: Side, question: usize, answers: &[usize]) -> Result<CMat> {
        let meas = self.measurements(side);
        let elems = meas
            .get(question)
            .ok_or_else(|| Error::param("question", format!("{question} out of range 0..{}", meas.len())))?;
        let d = elems[0].nrows();
        let mut op = linalg::zeros(d);
        for &a in answers {
            let e = elems
                .get(a)
                .ok_or_else(|| Error::param("answers", format!("{a} out of range 0..{}", elems.len())))?;
            op += e;
        }
        Ok(op)
    }

    /// Restriction to a subset of questions, renumbered in the order given.
    pub fn restrict_questions(&self, xs: &[usize], ys: &[usize]) -> Result<Strategy> {
        let pick = |meas: &[Vec<CMat>], qs: &[usize], name: &'static str| -> Result<Vec<Vec<CMat>>> {
            if qs.is_empty() {
                return Err(Error::param(name, "question subset is empty"));
            }
            qs.iter()
                .map(|&q| {
                    meas.get(q)
                        .cloned()
                        .ok_or_else(|| Error::param(name, format!("question {q} out of range")))
                })
                .collect()
        };
        Strategy::new(self.d_a, self.d_b, self.state.clone(), pick(&self.alice, xs, "xs")?, pick(&self.bob, ys, "ys")?)
    }

    /// Conjugates by local unitaries: `|ψ⟩ → (U_A ⊗ U_B)|ψ⟩`, `Π → U Π U†`.
    pub fn conjugate_local(&self, u_a: &CMat, u_b: &CMat) -> Result<Strategy> {
        if u_a.nrows() != self.d_a || u_b.nrows() != self.d_b {
            return Err(Error::Shape("unitary dimensions do not match the strategy".into()));
        }
        let rot = |meas: &[Vec<CMat>], u: &CMat| -> Vec<Vec<CMat>> {
            meas.iter()
                .map(|q| q.iter().map(|p| u * p * u.adjoint()).collect())
                .collect()
        };
        Strategy::new(
            self.d_a,
            self.d_b,
            linalg::apply_local(u_a, u_b, &self.state),
            rot(&self.alice, u_a),
            rot(&self.bob, u_b),
        )
    }

    /// Tensors in an ancilla `|φ⟩ ∈ H_A' ⊗ H_B'` that no measurement touches.
    /// Alice's space becomes `H_A ⊗ H_A'` and Bob's `H_B ⊗ H_B'`.
    pub fn tensor_ancilla(&self, ancilla: &CVec, e_a: usize, e_b: usize) -> Result<Strategy> {
        if ancilla.len() != e_a * e_b {
            return Err(Error::Shape("ancilla length does not match its dimensions".into()));
        }
        let (d_a, d_b) = (self.d_a, self.d_b);
        let (na, nb) = (d_a * e_a, d_b * e_b);
        let mut state = CVec::zeros(na * nb);
        for i in 0..d_a {
            for j in 0..d_b {
                let amp = self.state[i * d_b + j];
                if amp == linalg::ZERO {
                    continue;
                }
                for k in 0..e_a {
                    for l in 0..e_b {
                        state[(i * e_a + k) * nb + j * e_b + l] = amp * ancilla[k * e_b + l];
                    }
                }
            }
        }
        let pad = |meas: &[Vec<CMat>], e: usize| -> Vec<Vec<CMat>> {
            meas.iter()
                .map(|q| q.iter().map(|p| linalg::kron(p, &linalg::identity(e))).collect())
                .collect()
        };
        Strategy::new(na, nb, state, pad(&self.alice, e_a), pad(&self.bob, e_b))
    }

    /// Block-diagonal direct sum `⊕ √ω_i |ψ_i⟩` with measurements embedded
    /// block by block; answers of block `i` occupy a contiguous range after
    /// those of block `i-1`, matching [`crate::correlation::direct_sum`].
    pub fn direct_sum(blocks: &[(f64, Strategy)]) -> Result<Strategy> {
        let Some((_, first)) = blocks.first() else {
            return Err(Error::param("blocks", "direct sum needs at least one block"));
        };
        let (m, n) = first.questions();
        if blocks.iter().any(|(_, s)| s.questions() != (m, n)) {
            return Err(Error::Shape("blocks disagree on question counts".into()));
        }
        let total: f64 = blocks.iter().map(|(w, _)| *w).sum();
        if blocks.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::param("weights", "must be non-negative and sum to 1"));
        }
        let d_a: usize = blocks.iter().map(|(_, s)| s.d_a).sum();
        let d_b: usize = blocks.iter().map(|(_, s)| s.d_b).sum();
        let r: usize = blocks.iter().map(|(_, s)| s.answers().0).sum();
        let s_total: usize = blocks.iter().map(|(_, s)| s.answers().1).sum();

        let mut coeffs = CMat::zeros(d_a, d_b);
        let mut alice = vec![vec![linalg::zeros(d_a); r]; m];
        let mut bob = vec![vec![linalg::zeros(d_b); s_total]; n];
        let (mut oa, mut ob, mut ra, mut rb) = (0, 0, 0, 0);
        for (w, blk) in blocks {
            let scale = linalg::re(w.sqrt());
            coeffs
                .view_mut((oa, ob), (blk.d_a, blk.d_b))
                .copy_from(&(blk.coefficients() * scale));
            for (x, q) in blk.alice.iter().enumerate() {
                for (a, p) in q.iter().enumerate() {
                    alice[x][ra + a].view_mut((oa, oa), (blk.d_a, blk.d_a)).copy_from(p);
                }
            }
            for (y, q) in blk.bob.iter().enumerate() {
                for (b, p) in q.iter().enumerate() {
                    bob[y][rb + b].view_mut((ob, ob), (blk.d_b, blk.d_b)).copy_from(p);
                }
            }
            oa += blk.d_a;
            ob += blk.d_b;
            ra += blk.answers().0;
            rb += blk.answers().1;
        }
        Strategy::new(d_a, d_b, linalg::vectorize(&coeffs), alice, bob)
    }
}

fn check_side(meas: &[Vec<CMat>], d: usize, who: &str) -> Result<()> {
    let Some(first) = meas.first() else {
        return Err(Error::Shape(format!("{who} has no questions")));
    };
    let r = first.len();
    if r == 0 {
        return Err(Error::Shape(format!("{who} has a question without answers")));
    }
    for (x, q) in meas.iter().enumerate() {
        if q.len() != r {
            return Err(Error::Shape(format!(
                "{who} question {x} has {} answers, expected {r}",
                q.len()
            )));
        }
        if q.iter().any(|p| p.nrows() != d || p.ncols() != d) {
            return Err(Error::Shape(format!("{who} question {x} has an element that is not {d}×{d}")));
        }
    }
    Ok(())
}

fn validate_measurement(side: Side, x: usize, elems: &[CMat], d: usize, out: &mut Vec<Violation>) {
    let mut push = |kind, answers: Vec<usize>, residual: f64| {
        if residual > PROJECTOR_TOL {
            out.push(Violation {
                kind,
                side: Some(side),
                question: Some(x),
                answers,
                residual,
                tolerance: PROJECTOR_TOL,
            });
        }
    };
    let mut sum = linalg::zeros(d);
    for (a, p) in elems.iter().enumerate() {
        push(ViolationKind::NotHermitian, vec![a], linalg::hermiticity_residual(p));
        push(ViolationKind::NotIdempotent, vec![a], linalg::frobenius(&(p * p - p)));
        sum += p;
    }
    for a in 0..elems.len() {
        for b in a + 1..elems.len() {
            push(ViolationKind::NotOrthogonal, vec![a, b], linalg::frobenius(&(&elems[a] * &elems[b])));
        }
    }
    push(ViolationKind::Incomplete, vec![], linalg::frobenius(&(sum - linalg::identity(d))));
}

/// Hermitian operator with spectrum in `{−1, 0, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMat,
}

/// Which answer each eigenspace of an observable is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnswerRouting {
    pub plus: usize,
    pub minus: usize,
    pub kernel: Option<usize>,
}

impl AnswerRouting {
    pub fn binary(plus: usize, minus: usize) -> Self {
        AnswerRouting { plus, minus, kernel: None }
    }

    pub fn ternary(plus: usize, minus: usize, kernel: usize) -> Self {
        AnswerRouting { plus, minus, kernel: Some(kernel) }
    }
}

impl Observable {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape("observable must be square".into()));
        }
        let herm = linalg::hermiticity_residual(&matrix);
        if herm > OBSERVABLE_TOL {
            return Err(Error::residual("observable hermiticity", herm, OBSERVABLE_TOL));
        }
        let cube = linalg::frobenius(&(&matrix * &matrix * &matrix - &matrix));
        if cube > OBSERVABLE_TOL {
            return Err(Error::residual("observable spectrum ‖M³−M‖", cube, OBSERVABLE_TOL));
        }
        Ok(Observable { matrix })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenprojectors routed to answers; unused answers get zero matrices.
    pub fn to_projectors(&self, routing: AnswerRouting, answers: usize) -> Result<Vec<CMat>> {
        observable_to_projectors(self, routing, answers)
    }
}

/// Splits an observable into its `+1`, `−1` and kernel eigenprojectors and
/// assigns them to answers. Eigenvalues are clustered at
/// [`EIGEN_CLUSTER_TOL`].
pub fn observable_to_projectors(o: &Observable, routing: AnswerRouting, answers: usize) -> Result<Vec<CMat>> {
    let d = o.dim();
    let (vals, vecs) = linalg::eigh(&o.matrix);
    let (mut plus, mut minus, mut kernel) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &v) in vals.iter().enumerate() {
        if (v - 1.0).abs() <= EIGEN_CLUSTER_TOL {
            plus.push(k);
        } else if (v + 1.0).abs() <= EIGEN_CLUSTER_TOL {
            minus.push(k);
        } else if v.abs() <= EIGEN_CLUSTER_TOL {
            kernel.push(k);
        } else {
            return Err(Error::EigenvalueOutOfBand { value: v });
        }
    }
    let mut used: Vec<usize> = Vec::new();
    let mut out = vec![linalg::zeros(d); answers];
    let spaces = [
        (Some(routing.plus), plus, "plus"),
        (Some(routing.minus), minus, "minus"),
        (routing.kernel, kernel, "kernel"),
    ];
    for (answer, idx, name) in spaces {
        if idx.is_empty() {
            continue;
        }
        let a = answer.ok_or_else(|| Error::param("routing", format!("{name} eigenspace is nonzero but has no answer")))?;
        if a >= answers {
            return Err(Error::param("routing", format!("answer {a} out of range 0..{answers}")));
        }
        if used.contains(&a) {
            return Err(Error::param("routing", format!("answer {a} receives two eigenspaces")));
        }
        used.push(a);
        out[a] = linalg::projector_from_columns(&linalg::columns(&vecs, &idx));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct StrategyJson {
    d_a: usize,
    d_b: usize,
    state: Vec<[f64; 2]>,
    alice: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    bob: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn matrix_to_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn matrix_from_json(rows: &[Vec<[f64; 2]>], d: usize) -> Result<CMat> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Shape(format!("measurement element is not {d}×{d}")));
    }
    Ok(CMat::from_fn(d, d, |i, j| num_complex::Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let side = |meas: &[Vec<CMat>]| -> Vec<Vec<Vec<Vec<[f64; 2]>>>> {
            meas.iter().map(|q| q.iter().map(matrix_to_json).collect()).collect()
        };
        StrategyJson {
            d_a: self.d_a,
            d_b: self.d_b,
            state: self.state.iter().map(|z| [z.re, z.im]).collect(),
            alice: side(&self.alice),
            bob: side(&self.bob),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = StrategyJson::deserialize(de)?;
        let side = |meas: &[Vec<Vec<Vec<[f64; 2]>>>], d: usize| -> Result<Vec<Vec<CMat>>> {
            meas.iter()
                .map(|q| q.iter().map(|m| matrix_from_json(m, d)).collect())
                .collect()
        };
        let build = || -> Result<Strategy> {
            let state = CVec::from_iterator(
                j.state.len(),
                j.state.iter().map(|p| num_complex::Complex64::new(p[0], p[1])),
            );
            Strategy::new(j.d_a, j.d_b, state, side(&j.alice, j.d_a)?, side(&j.bob, j.d_b)?)
        };
        build().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, re};

    fn sigma_z() -> CMat {
        from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    fn standard_basis_strategy() -> Strategy {
        let mut state = CVec::zeros(4);
        state[0] = linalg::ONE;
        let meas = vec![linalg::basis_projector(2, 0), linalg::basis_projector(2, 1)];
        Strategy::new(2, 2, state, vec![meas.clone(); 2], vec![meas; 3]).unwrap()
    }

    #[test]
    fn product_state_is_deterministic() {
        let p = standard_basis_strategy().induce().unwrap();
        for x in 0..2 {
            for y in 0..3 {
                assert_eq!(p.get(x, y, 0, 0), 1.0);
            }
        }
    }

    #[test]
    fn maximally_entangled_z_measurements_are_perfectly_correlated() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = CVec::from_vec(vec![re(h), re(0.0), re(0.0), re(h)]);
        let meas = vec![linalg::basis_projector(2, 0), linalg::basis_projector(2, 1)];
        let s = Strategy::new(2, 2, state, vec![meas.clone()], vec![meas]).unwrap();
        let p = s.induce().unwrap();
        assert!((p.get(0, 0, 0, 0) - 0.5).abs() < 1e-15);
        assert!((p.get(0, 0, 1, 1) - 0.5).abs() < 1e-15);
        assert_eq!(p.get(0, 0, 0, 1), 0.0);
    }

    #[test]
    fn scaled_projector_reports_idempotence_residual() {
        let s = standard_basis_strategy();
        let p = s.element(Side::A, 0, 0) * re(1.01);
        let bad = s.with_element(Side::A, 0, 0, p.clone()).unwrap();
        let report = bad.validate();
        let v = report
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::NotIdempotent)
            .expect("idempotence violation");
        // (1.01Π)² − 1.01Π = 0.0101Π
        assert!((v.residual - 0.0101 * linalg::frobenius(s.element(Side::A, 0, 0))).abs() < 1e-12);
        assert!(report.has(ViolationKind::Incomplete));
        assert!(bad.induce().is_err());
    }

    #[test]
    fn dropped_element_reports_completeness_residual() {
        let s = standard_basis_strategy();
        let missing = s.element(Side::B, 1, 1).clone();
        let bad = s.with_element(Side::B, 1, 1, linalg::zeros(2)).unwrap();
        let report = bad.validate();
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.kind, ViolationKind::Incomplete);
        assert_eq!((v.side, v.question), (Some(Side::B), Some(1)));
        assert!((v.residual - linalg::frobenius(&missing)).abs() < 1e-15);
    }

    #[test]
    fn denormalized_state_is_flagged() {
        let s = standard_basis_strategy();
        let bad = s.with_state(s.state() * re(1.001)).unwrap();
        assert!(bad.validate().has(ViolationKind::StateNorm));
        assert!(s.validate().is_valid());
    }

    #[test]
    fn pauli_z_splits_into_basis_projectors() {
        let o = Observable::new(sigma_z()).unwrap();
        let ps = o.to_projectors(AnswerRouting::binary(0, 1), 2).unwrap();
        assert!(linalg::frobenius(&(&ps[0] - linalg::basis_projector(2, 0))) < 1e-14);
        assert!(linalg::frobenius(&(&ps[1] - linalg::basis_projector(2, 1))) < 1e-14);
    }

    #[test]
    fn zero_observable_routes_everything_to_kernel() {
        let o = Observable::new(linalg::zeros(3)).unwrap();
        let ps = o.to_projectors(AnswerRouting::ternary(0, 1, 2), 3).unwrap();
        assert_eq!(ps[0], linalg::zeros(3));
        assert_eq!(ps[1], linalg::zeros(3));
        assert!(linalg::frobenius(&(&ps[2] - linalg::identity(3))) < 1e-14);
    }

    #[test]
    fn observable_rejects_bad_spectrum_and_routing() {
        assert!(Observable::new(from_real_rows(&[&[0.5, 0.0], &[0.0, 1.0]])).is_err());
        let o = Observable::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert!(o.to_projectors(AnswerRouting::binary(0, 1), 2).is_err());
        assert!(o.to_projectors(AnswerRouting::ternary(0, 1, 0), 2).is_err());
        assert!(o.to_projectors(AnswerRouting::ternary(0, 1, 5), 2).is_err());
    }

    #[test]
    fn projected_substate_of_full_answer_set_is_state() {
        let s = standard_basis_strategy();
        let v = s.projected_substate(Side::B, 2, &[0, 1]).unwrap();
        assert!((v - s.state()).norm() < 1e-15);
        assert!(s.projected_substate(Side::A, 5, &[0]).is_err());
        assert!(s.projected_substate(Side::A, 0, &[4]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = standard_basis_strategy();
        let text = serde_json::to_string(&s).unwrap();
        let back: Strategy = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["state"][0], serde_json::json!([1.0, 0.0]));
        assert_eq!(v["alice"][0][1][1][1], serde_json::json!([1.0, 0.0]));
    }

    #[test]
    fn direct_sum_embeds_blocks() {
        let s = standard_basis_strategy();
        let sum = Strategy::direct_sum(&[(0.5, s.clone()), (0.5, s)]).unwrap();
        assert_eq!(sum.dims(), (4, 4));
        assert_eq!(sum.answers(), (4, 4));
        assert!(sum.validate().is_valid());
        let p = sum.induce().unwrap();
        assert!((p.get(0, 0, 0, 0) - 0.5).abs() < 1e-15);
        assert!((p.get(1, 2, 2, 2) - 0.5).abs() < 1e-15);
    }
}
