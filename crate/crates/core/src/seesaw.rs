//! See-saw search for a dimension-`d` strategy close to a target correlation
//! in squared `l2` distance.
//!
//! Iterates are a density operator `ρ` on `ℂ^d ⊗ ℂ^d` and one POVM per
//! question. Each block (the state, then every question on each side) is a
//! convex quadratic over a convex set and is improved by conditional-gradient
//! steps with exact line search, so the objective never increases. The best
//! restart is then polished with Levenberg-Marquardt over pure states and
//! projective measurements, kept only if it lowers the objective.
//!
//! Results are heuristic upper bounds on the optimal distance at dimension
//! `d`; nothing here certifies optimality.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{Correlation, Metric};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::separating::truncation_distance;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    None,
    /// Purify the state and dilate every POVM to a projective measurement.
    Projective,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeesawConfig {
    pub dim: usize,
    pub max_outer_iters: usize,
    /// Conditional-gradient steps per block and outer iteration.
    pub inner_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Stop a restart once an outer iteration lowers the objective by less.
    pub convergence_tol: f64,
    pub metric: Metric,
    pub rounding: Rounding,
    /// Levenberg-Marquardt iterations on the best restart; 0 disables.
    pub polish_iters: usize,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        SeesawConfig {
            dim: 2,
            max_outer_iters: 200,
            inner_iters: 3,
            restarts: 20,
            seed: 0,
            convergence_tol: 1e-12,
            metric: Metric::L2,
            rounding: Rounding::None,
            polish_iters: 50,
        }
    }
}

impl SeesawConfig {
    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.max_outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::param("max_outer_iters", "iteration counts must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        if self.metric != Metric::L2 {
            return Err(Error::param("metric", "the see-saw objective is l2 only"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::param("convergence_tol", "must be non-negative"));
        }
        Ok(())
    }
}

/// Mixed state and POVMs on `ℂ^d ⊗ ℂ^d`.
#[derive(Debug, Clone)]
pub struct PovmStrategy {
    pub dim: usize,
    pub rho: CMat,
    pub alice: Vec<Vec<CMat>>,
    pub bob: Vec<Vec<CMat>>,
}

impl PovmStrategy {
    fn shape(&self) -> (usize, usize, usize, usize) {
        (self.alice.len(), self.bob.len(), self.alice[0].len(), self.bob[0].len())
    }

    /// `tr(ρ E_xa ⊗ F_yb)` in `[x][y][a][b]` order.
    pub fn probabilities(&self) -> Vec<f64> {
        let (m, n, r, s) = self.shape();
        let marg = alice_marginals(&self.rho, &self.bob, self.dim);
        let mut out = vec![0.0; m * n * r * s];
        for x in 0..m {
            for y in 0..n {
                for a in 0..r {
                    for b in 0..s {
                        out[((x * n + y) * r + a) * s + b] = linalg::trace_product(&self.alice[x][a], &marg[y][b]).re;
                    }
                }
            }
        }
        out
    }

    pub fn induce(&self) -> Result<Correlation> {
        let (m, n, r, s) = self.shape();
        let table = self.probabilities().into_iter().map(|p| p.max(0.0)).collect();
        Correlation::with_tolerance(m, n, r, s, table, 1e-9)
    }

    /// Projective strategy realizing the same correlation: the state is
    /// purified into a register held by Alice and every POVM `{E_a}` is
    /// replaced by `U†(I ⊗ |a⟩⟨a|)U` for a unitary extending
    /// `|φ⟩|0⟩ ↦ Σ_a √E_a|φ⟩|a⟩`. Alice's space is `(ℂ^d ⊗ ℂ^r) ⊗ ℂ^k`
    /// with `k = rank ρ`; Bob's is `ℂ^d ⊗ ℂ^s`.
    pub fn dilate(&self) -> Result<Strategy> {
        let d = self.dim;
        let (_, _, r, s) = self.shape();
        let (vals, vecs) = linalg::eigh(&self.rho);
        let kept: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-14).collect();
        let k = kept.len();
        let total: f64 = kept.iter().map(|&i| vals[i]).sum();
        let (da, db) = (d * r * k, d * s);
        let mut state = CVec::zeros(da * db);
        for (slot, &e) in kept.iter().enumerate() {
            let w = linalg::re((vals[e] / total).sqrt());
            for i in 0..d {
                for j in 0..d {
                    let amp = vecs[(i * d + j, e)] * w;
                    state[((i * r) * k + slot) * db + j * s] = amp;
                }
            }
        }
        let alice = self
            .alice
            .iter()
            .map(|q| Ok(naimark(q)?.into_iter().map(|p| linalg::kron(&p, &linalg::identity(k))).collect()))
            .collect::<Result<Vec<Vec<CMat>>>>()?;
        let bob = self.bob.iter().map(|q| naimark(q)).collect::<Result<Vec<_>>>()?;
        Strategy::new(da, db, state, alice, bob)
    }
}

/// Projective measurement on `ℂ^d ⊗ ℂ^n` (index `i·n + a`) whose
/// statistics on `|φ⟩|0⟩` reproduce the POVM.
fn naimark(povm: &[CMat]) -> Result<Vec<CMat>> {
    let d = povm[0].nrows();
    let n = povm.len();
    let roots: Vec<CMat> = povm.iter().map(linalg::psd_sqrt).collect();
    // columns i·n of U are V|i⟩ = Σ_a √E_a|i⟩|a⟩
    let mut v = CMat::zeros(d * n, d);
    for (a, root) in roots.iter().enumerate() {
        for i in 0..d {
            for row in 0..d {
                v[(row * n + a, i)] = root[(row, i)];
            }
        }
    }
    let isometry = linalg::frobenius(&(v.adjoint() * &v - linalg::identity(d)));
    if isometry > 1e-8 {
        return Err(Error::residual("POVM completeness for dilation", isometry, 1e-8));
    }
    let comp = linalg::orthonormal_complement(&v);
    let mut u = CMat::zeros(d * n, d * n);
    let mut next = 0;
    for col in 0..d * n {
        if col % n == 0 {
            u.set_column(col, &v.column(col / n));
        } else {
            u.set_column(col, &comp.column(next));
            next += 1;
        }
    }
    Ok((0..n)
        .map(|a| {
            let mut sel = linalg::zeros(n);
            sel[(a, a)] = linalg::ONE;
            let p = u.adjoint() * linalg::kron(&linalg::identity(d), &sel) * &u;
            (&p + p.adjoint()) * linalg::re(0.5)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct RestartTrace {
    pub restart: usize,
    /// Objective after initialization and after every outer iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeesawResult {
    /// `l2` distance of the best strategy found.
    pub distance: f64,
    /// Squared distance before polishing.
    pub seesaw_objective: f64,
    pub best_restart: usize,
    pub polished: bool,
    pub converged: bool,
    pub dim: usize,
    /// Local dimensions of `strategy`; larger than `dim` after dilation.
    pub strategy_dims: Option<(usize, usize)>,
    /// Projective strategy, present after polishing or projective rounding.
    pub strategy: Option<Strategy>,
    pub traces: Vec<RestartTrace>,
    #[serde(skip)]
    pub povm: PovmStrategy,
}

impl SeesawResult {
    /// CSV with header `restart,iter,objective`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["restart", "iter", "objective"]).map_err(ser)?;
        for t in &self.traces {
            for (i, v) in t.objective.iter().enumerate() {
                w.write_record([t.restart.to_string(), i.to_string(), format!("{v:e}")]).map_err(ser)?;
            }
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

struct Problem<'a> {
    target: &'a Correlation,
    m: usize,
    n: usize,
    r: usize,
    s: usize,
}

impl Problem<'_> {
    fn idx(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.n + y) * self.r + a) * self.s + b
    }

    fn residual(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.target.as_slice()).map(|(p, t)| p - t).collect()
    }
}

fn objective(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

/// `M^{yb} = tr_B(ρ (I ⊗ F_yb))`, so that `tr(ρ E⊗F) = tr(E M)`.
fn alice_marginals(rho: &CMat, bob: &[Vec<CMat>], d: usize) -> Vec<Vec<CMat>> {
    bob.iter()
        .map(|q| {
            q.iter()
                .map(|f| {
                    CMat::from_fn(d, d, |i, k| {
                        let mut acc = linalg::ZERO;
                        for j in 0..d {
                            for l in 0..d {
                                acc += rho[(i * d + j, k * d + l)] * f[(l, j)];
                            }
                        }
                        acc
                    })
                })
                .collect()
        })
        .collect()
}

/// `N^{xa} = tr_A(ρ (E_xa ⊗ I))`, so that `tr(ρ E⊗F) = tr(F N)`.
fn bob_marginals(rho: &CMat, alice: &[Vec<CMat>], d: usize) -> Vec<Vec<CMat>> {
    alice
        .iter()
        .map(|q| {
            q.iter()
                .map(|e| {
                    CMat::from_fn(d, d, |j, l| {
                        let mut acc = linalg::ZERO;
                        for i in 0..d {
                            for k in 0..d {
                                acc += rho[(i * d + j, k * d + l)] * e[(k, i)];
                            }
                        }
                        acc
                    })
                })
                .collect()
        })
        .collect()
}

/// Minimizer of `f(γ) = Σ (r + γδ)²` over `[0, 1]`.
fn line_search(res: &[f64], delta: &[f64]) -> f64 {
    let num: f64 = res.iter().zip(delta).map(|(r, d)| r * d).sum();
    let den: f64 = delta.iter().map(|d| d * d).sum();
    if den <= 0.0 {
        return 0.0;
    }
    (-num / den).clamp(0.0, 1.0)
}

fn random_projective<R: Rng>(d: usize, answers: usize, rng: &mut R) -> Vec<CMat> {
    let u = linalg::random_unitary(d, rng);
    let mut out = vec![linalg::zeros(d); answers];
    for k in 0..d {
        let a = rng.random_range(0..answers);
        let col = linalg::columns(&u, &[k]);
        out[a] += linalg::projector_from_columns(&col);
    }
    out
}

/// Best projective measurement assembled from candidate bases: each basis
/// vector goes to the answer with the smallest `⟨v|G_a|v⟩`.
fn measurement_lmo(grads: &[CMat]) -> (Vec<CMat>, f64) {
    let d = grads[0].nrows();
    let mut bases = Vec::new();
    for (a, g) in grads.iter().enumerate() {
        bases.push(linalg::eigh(g).1);
        for h in &grads[a + 1..] {
            bases.push(linalg::eigh(&(g - h)).1);
        }
    }
    let mut best: Option<(Vec<CMat>, f64)> = None;
    for basis in bases {
        let mut elems = vec![linalg::zeros(d); grads.len()];
        let mut value = 0.0;
        for k in 0..d {
            let v = basis.column(k);
            let (a, cost) = grads
                .iter()
                .map(|g| v.dotc(&(g * v)).re)
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("at least one answer");
            value += cost;
            elems[a] += &v * v.adjoint();
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((elems, value));
        }
    }
    best.expect("at least one candidate")
}

struct Restart {
    povm: PovmStrategy,
    trace: RestartTrace,
    objective: f64,
}

fn run_restart(prob: &Problem, cfg: &SeesawConfig, restart: usize) -> Restart {
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let psi = linalg::random_state(d * d, &mut rng);
    let mut st = PovmStrategy {
        dim: d,
        rho: &psi * psi.adjoint(),
        alice: (0..prob.m).map(|_| random_projective(d, prob.r, &mut rng)).collect(),
        bob: (0..prob.n).map(|_| random_projective(d, prob.s, &mut rng)).collect(),
    };
    let mut f = objective(&prob.residual(&st.probabilities()));
    let mut trace = RestartTrace { restart, objective: vec![f], iterations: 0, converged: false };
    for _ in 0..cfg.max_outer_iters {
        let before = f;
        f = state_steps(prob, &mut st, cfg.inner_iters, f);
        f = alice_steps(prob, &mut st, cfg.inner_iters, f);
        f = bob_steps(prob, &mut st, cfg.inner_iters, f);
        trace.objective.push(f);
        trace.iterations += 1;
        if before - f <= cfg.convergence_tol {
            trace.converged = true;
            break;
        }
    }
    Restart { povm: st, trace, objective: f }
}

fn state_steps(prob: &Problem, st: &mut PovmStrategy, steps: usize, mut f: f64) -> f64 {
    let d = st.dim;
    for _ in 0..steps {
        let p = st.probabilities();
        let res = prob.residual(&p);
        let mut grad = linalg::zeros(d * d);
        for x in 0..prob.m {
            for a in 0..prob.r {
                let mut w = linalg::zeros(d);
                for y in 0..prob.n {
                    for b in 0..prob.s {
                        w += &st.bob[y][b] * linalg::re(2.0 * res[prob.idx(x, y, a, b)]);
                    }
                }
                grad += linalg::kron(&st.alice[x][a], &w);
            }
        }
        let (_, vecs) = linalg::eigh(&grad);
        let v = vecs.column(0).into_owned();
        let coeffs = linalg::coefficient_matrix(&v, d, d);
        let mut delta = vec![0.0; p.len()];
        for x in 0..prob.m {
            for a in 0..prob.r {
                let left = &st.alice[x][a] * &coeffs;
                for y in 0..prob.n {
                    for b in 0..prob.s {
                        let out = &left * st.bob[y][b].transpose();
                        let q = coeffs.iter().zip(out.iter()).map(|(c, o)| (c.conj() * o).re).sum::<f64>();
                        let i = prob.idx(x, y, a, b);
                        delta[i] = q - p[i];
                    }
                }
            }
        }
        let gamma = line_search(&res, &delta);
        if gamma == 0.0 {
            break;
        }
        let next = &st.rho * linalg::re(1.0 - gamma) + &v * v.adjoint() * linalg::re(gamma);
        let f_next = objective(&prob.residual(&PovmStrategy { rho: next.clone(), ..st.clone() }.probabilities()));
        if f_next >= f {
            break;
        }
        st.rho = next;
        f = f_next;
    }
    f
}

/// Conditional-gradient steps on one side's POVMs, one question at a time.
/// `marg[q][c]` is the reduced operator pairing this side's elements with
/// the other side's question `q`, answer `c`.
fn measurement_steps(
    prob: &Problem,
    elems: &mut [Vec<CMat>],
    marg: &[Vec<CMat>],
    alice_side: bool,
    steps: usize,
    p: &mut [f64],
    mut f: f64,
) -> f64 {
    let (own_q, own_a) = if alice_side { (prob.m, prob.r) } else { (prob.n, prob.s) };
    let idx = |own: usize, other: usize, a: usize, c: usize| {
        if alice_side {
            prob.idx(own, other, a, c)
        } else {
            prob.idx(other, own, c, a)
        }
    };
    for q in 0..own_q {
        for _ in 0..steps {
            let res = prob.residual(p);
            let grads: Vec<CMat> = (0..own_a)
                .map(|a| {
                    let mut g = linalg::zeros(elems[q][a].nrows());
                    for (o, row) in marg.iter().enumerate() {
                        for (c, mm) in row.iter().enumerate() {
                            g += mm * linalg::re(2.0 * res[idx(q, o, a, c)]);
                        }
                    }
                    (&g + g.adjoint()) * linalg::re(0.5)
                })
                .collect();
            let (vertex, _) = measurement_lmo(&grads);
            let mut delta = vec![0.0; p.len()];
            for a in 0..own_a {
                let diff = &vertex[a] - &elems[q][a];
                for (o, row) in marg.iter().enumerate() {
                    for (c, mm) in row.iter().enumerate() {
                        delta[idx(q, o, a, c)] = linalg::trace_product(&diff, mm).re;
                    }
                }
            }
            let gamma = line_search(&res, &delta);
            let next: Vec<f64> = p.iter().zip(&delta).map(|(p, d)| p + gamma * d).collect();
            let f_next = objective(&prob.residual(&next));
            if gamma == 0.0 || f_next >= f {
                break;
            }
            for a in 0..own_a {
                elems[q][a] = &elems[q][a] * linalg::re(1.0 - gamma) + &vertex[a] * linalg::re(gamma);
            }
            p.copy_from_slice(&next);
            f = f_next;
        }
    }
    f
}

fn alice_steps(prob: &Problem, st: &mut PovmStrategy, steps: usize, f: f64) -> f64 {
    let marg = alice_marginals(&st.rho, &st.bob, st.dim);
    let mut p = st.probabilities();
    measurement_steps(prob, &mut st.alice, &marg, true, steps, &mut p, f)
}

fn bob_steps(prob: &Problem, st: &mut PovmStrategy, steps: usize, f: f64) -> f64 {
    let marg = bob_marginals(&st.rho, &st.alice, st.dim);
    let mut p = st.probabilities();
    measurement_steps(prob, &mut st.bob, &marg, false, steps, &mut p, f)
}

/// Pure state with projective measurements `Π_a = U P_a U†`, where `P_a`
/// projects onto the basis vectors assigned to answer `a`.
#[derive(Debug, Clone)]
struct PureProjective {
    d: usize,
    psi: CVec,
    alice: Vec<(CMat, Vec<usize>)>,
    bob: Vec<(CMat, Vec<usize>)>,
}

fn diag_projector(d: usize, assign: &[usize], a: usize) -> CMat {
    CMat::from_fn(d, d, |i, j| if i == j && assign[i] == a { linalg::ONE } else { linalg::ZERO })
}

impl PureProjective {
    fn elements(&self, alice_side: bool, answers: usize) -> Vec<Vec<CMat>> {
        let meas = if alice_side { &self.alice } else { &self.bob };
        meas.iter()
            .map(|(u, assign)| (0..answers).map(|a| u * diag_projector(self.d, assign, a) * u.adjoint()).collect())
            .collect()
    }

    fn to_strategy(&self, r: usize, s: usize) -> Result<Strategy> {
        Strategy::new(self.d, self.d, self.psi.clone(), self.elements(true, r), self.elements(false, s))
    }

    /// Rounds every POVM to a projective measurement in the eigenbasis of
    /// its most informative element; the state becomes the top eigenvector.
    fn from_povm(st: &PovmStrategy) -> PureProjective {
        let d = st.dim;
        let (_, vecs) = linalg::eigh(&st.rho);
        let psi = vecs.column(d * d - 1).into_owned();
        let round = |q: &Vec<CMat>| -> (CMat, Vec<usize>) {
            let mut best: Option<(f64, CMat, Vec<usize>)> = None;
            for e in q {
                let (_, basis) = linalg::eigh(e);
                let assign: Vec<usize> = (0..d)
                    .map(|k| {
                        let v = basis.column(k);
                        (0..q.len())
                            .max_by(|&a, &b| v.dotc(&(&q[a] * v)).re.total_cmp(&v.dotc(&(&q[b] * v)).re))
                            .expect("answers")
                    })
                    .collect();
                let err: f64 = (0..q.len())
                    .map(|a| linalg::frobenius(&(&basis * diag_projector(d, &assign, a) * basis.adjoint() - &q[a])))
                    .sum();
                if best.as_ref().is_none_or(|b| err < b.0) {
                    best = Some((err, basis, assign));
                }
            }
            let (_, u, assign) = best.expect("non-empty question");
            (u, assign)
        };
        PureProjective { d, psi, alice: st.alice.iter().map(round).collect(), bob: st.bob.iter().map(round).collect() }
    }
}

/// Real Hermitian generators indexed `0..d²`: diagonal units, then the
/// symmetric and antisymmetric pairs for `k < l`.
fn generator_weight(k_mat: &CMat, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(k_mat[(k, k)].re);
    }
    for k in 0..d {
        for l in k + 1..d {
            out.push(2.0 * k_mat[(k, l)].re);
            out.push(2.0 * k_mat[(k, l)].im);
        }
    }
    out
}

fn generator(h: &[f64], d: usize) -> CMat {
    let mut g = linalg::zeros(d);
    for k in 0..d {
        g[(k, k)] = linalg::re(h[k]);
    }
    let mut i = d;
    for k in 0..d {
        for l in k + 1..d {
            let z = num_complex::Complex64::new(h[i], h[i + 1]);
            g[(k, l)] = z;
            g[(l, k)] = z.conj();
            i += 2;
        }
    }
    g
}

/// `e^{iH}` for Hermitian `H`.
fn exp_i(h: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(h);
    let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&v| num_complex::Complex64::from_polar(1.0, v)));
    &vecs * CMat::from_diagonal(&phases) * vecs.adjoint()
}

fn pure_residual(prob: &Problem, pp: &PureProjective) -> Vec<f64> {
    let alice = pp.elements(true, prob.r);
    let bob = pp.elements(false, prob.s);
    let psi = linalg::coefficient_matrix(&pp.psi, pp.d, pp.d);
    let mut p = vec![0.0; prob.m * prob.n * prob.r * prob.s];
    for x in 0..prob.m {
        for a in 0..prob.r {
            let left = &alice[x][a] * &psi;
            for y in 0..prob.n {
                for b in 0..prob.s {
                    let out = &left * bob[y][b].transpose();
                    p[prob.idx(x, y, a, b)] = psi.iter().zip(out.iter()).map(|(c, o)| (c.conj() * o).re).sum();
                }
            }
        }
    }
    prob.residual(&p)
}

/// Jacobian of the pure-state residual (rows `[x][y][a][b]`). Columns: real
/// and imaginary parts of `ψ`, then `d²` generator weights per Alice
/// question, then per Bob question. `‖ψ‖ = 1` is assumed.
fn pure_jacobian(prob: &Problem, pp: &PureProjective) -> DMatrix<f64> {
    let d = pp.d;
    let g = d * d;
    let (m, n, r, s) = (prob.m, prob.n, prob.r, prob.s);
    let rows = m * n * r * s;
    let cols = 2 * g + (m + n) * g;
    let mut jac = DMatrix::zeros(rows, cols);
    let alice = pp.elements(true, r);
    let bob = pp.elements(false, s);
    let psi = linalg::coefficient_matrix(&pp.psi, d, d);
    for x in 0..m {
        for a in 0..r {
            let left = &alice[x][a] * &psi;
            for y in 0..n {
                for b in 0..s {
                    let row = prob.idx(x, y, a, b);
                    let o_psi = &left * bob[y][b].transpose();
                    let p: f64 = psi.iter().zip(o_psi.iter()).map(|(c, o)| (c.conj() * o).re).sum();
                    for k in 0..g {
                        let (i, j) = (k / d, k % d);
                        jac[(row, k)] = 2.0 * (o_psi[(i, j)].re - p * psi[(i, j)].re);
                        jac[(row, g + k)] = 2.0 * (o_psi[(i, j)].im - p * psi[(i, j)].im);
                    }
                }
            }
        }
    }
    // dΠ = U i[H, P] U†, so dp = tr(H K) with K = i[P, U† M U]
    let im = num_complex::Complex64::new(0.0, 1.0);
    for x in 0..m {
        let (u, assign) = &pp.alice[x];
        for y in 0..n {
            for b in 0..s {
                let marg = &psi * bob[y][b].transpose() * psi.adjoint();
                let rot = u.adjoint() * marg * u;
                for a in 0..r {
                    let proj = diag_projector(d, assign, a);
                    let k_mat = (&proj * &rot - &rot * &proj) * im;
                    let w = generator_weight(&k_mat, d);
                    let row = prob.idx(x, y, a, b);
                    for (c, v) in w.into_iter().enumerate() {
                        jac[(row, 2 * g + x * g + c)] = v;
                    }
                }
            }
        }
    }
    for y in 0..n {
        let (u, assign) = &pp.bob[y];
        for x in 0..m {
            for a in 0..r {
                let marg = psi.transpose() * alice[x][a].transpose() * psi.conjugate();
                let rot = u.adjoint() * marg * u;
                for b in 0..s {
                    let proj = diag_projector(d, assign, b);
                    let k_mat = (&proj * &rot - &rot * &proj) * im;
                    let w = generator_weight(&k_mat, d);
                    let row = prob.idx(x, y, a, b);
                    for (c, v) in w.into_iter().enumerate() {
                        jac[(row, 2 * g + (m + y) * g + c)] = v;
                    }
                }
            }
        }
    }
    jac
}

fn apply_step(pp: &PureProjective, step: &DVector<f64>, m: usize) -> PureProjective {
    let d = pp.d;
    let g = d * d;
    let mut out = pp.clone();
    let mut psi = pp.psi.clone();
    for k in 0..g {
        psi[k] += num_complex::Complex64::new(step[k], step[g + k]);
    }
    let norm = psi.norm();
    out.psi = psi / linalg::re(norm);
    let rotate = |u: &CMat, off: usize| u * exp_i(&generator(&step.as_slice()[off..off + g], d));
    for (x, meas) in out.alice.iter_mut().enumerate() {
        meas.0 = rotate(&pp.alice[x].0, 2 * g + x * g);
    }
    for (y, meas) in out.bob.iter_mut().enumerate() {
        meas.0 = rotate(&pp.bob[y].0, 2 * g + (m + y) * g);
    }
    out
}

fn polish(prob: &Problem, start: PureProjective, iters: usize) -> (PureProjective, f64) {
    let mut cur = start;
    let mut res = pure_residual(prob, &cur);
    let mut f = objective(&res);
    let mut lambda = 1e-3;
    for _ in 0..iters {
        if f < 1e-30 {
            break;
        }
        let jac = pure_jacobian(prob, &cur);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let rhs = -(&jt * DVector::from_vec(res.clone()));
        let mut improved = false;
        for _ in 0..8 {
            let mut lhs = normal.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += lambda * (normal[(i, i)] + 1e-12);
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&rhs);
            let cand = apply_step(&cur, &step, prob.m);
            let cand_res = pure_residual(prob, &cand);
            let cand_f = objective(&cand_res);
            if cand_f < f {
                cur = cand;
                res = cand_res;
                f = cand_f;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (cur, f)
}

/// Runs `restarts` independent see-saw searches and returns the best.
pub fn optimize(target: &Correlation, cfg: &SeesawConfig) -> Result<SeesawResult> {
    cfg.check()?;
    let (m, n, r, s) = target.shape();
    let prob = Problem { target, m, n, r, s };
    let runs: Vec<Restart> = (0..cfg.restarts).into_par_iter().map(|i| run_restart(&prob, cfg, i)).collect();
    let best_restart = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let best = &runs[best_restart];
    let seesaw_objective = best.objective;
    let mut objective = seesaw_objective;
    let mut strategy = None;
    let mut polished = false;
    if cfg.polish_iters > 0 {
        let start = PureProjective::from_povm(&best.povm);
        let (pp, f) = polish(&prob, start, cfg.polish_iters);
        if f < objective {
            objective = f;
            strategy = Some(pp.to_strategy(r, s)?);
            polished = true;
        }
    }
    if strategy.is_none() && cfg.rounding == Rounding::Projective {
        strategy = Some(best.povm.dilate()?);
    }
    Ok(SeesawResult {
        distance: objective.max(0.0).sqrt(),
        seesaw_objective,
        best_restart,
        polished,
        converged: best.trace.converged,
        dim: cfg.dim,
        strategy_dims: strategy.as_ref().map(Strategy::dims),
        strategy,
        traces: runs.iter().map(|r| r.trace.clone()).collect(),
        povm: best.povm.clone(),
    })
}

/// Distance achieved by the ideal construction truncated to local
/// dimension `d`: a constructive upper bound on the optimum at `d`.
pub fn upper_bound_from_truncation(alpha: f64, d: usize, metric: Metric) -> Result<f64> {
    if d % 2 != 0 || d < 4 {
        return Err(Error::param("dim", format!("{d} must be even and at least 4")));
    }
    truncation_distance(alpha, d / 2, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Side;
    use crate::tilted_chsh::{ideal_strategy, params_from_alpha};

    fn chsh_target() -> Correlation {
        ideal_strategy(&params_from_alpha(0.5).unwrap()).unwrap().induce().unwrap()
    }

    #[test]
    fn config_validation() {
        let t = chsh_target();
        for cfg in [
            SeesawConfig { dim: 0, ..Default::default() },
            SeesawConfig { restarts: 0, ..Default::default() },
            SeesawConfig { metric: Metric::MaxTv, ..Default::default() },
        ] {
            assert!(optimize(&t, &cfg).is_err());
        }
    }

    #[test]
    fn marginals_reproduce_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let psi = linalg::random_state(d * d, &mut rng);
        let st = PovmStrategy {
            dim: d,
            rho: &psi * psi.adjoint(),
            alice: vec![random_projective(d, 2, &mut rng)],
            bob: vec![random_projective(d, 2, &mut rng)],
        };
        let p = st.probabilities();
        let nm = bob_marginals(&st.rho, &st.alice, d);
        for a in 0..2 {
            for b in 0..2 {
                let direct = linalg::trace_product(&st.rho, &linalg::kron(&st.alice[0][a], &st.bob[0][b])).re;
                assert!((p[a * 2 + b] - direct).abs() < 1e-12);
                assert!((linalg::trace_product(&st.bob[0][b], &nm[0][a]).re - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let target = chsh_target();
        let (m, n, r, s) = target.shape();
        let prob = Problem { target: &target, m, n, r, s };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 2;
        let pp = PureProjective {
            d,
            psi: linalg::random_state(d * d, &mut rng),
            alice: (0..m).map(|_| (linalg::random_unitary(d, &mut rng), vec![0, 1])).collect(),
            bob: (0..n).map(|_| (linalg::random_unitary(d, &mut rng), vec![1, 0])).collect(),
        };
        let jac = pure_jacobian(&prob, &pp);
        let h = 1e-6;
        // only tangent directions of the unit sphere are meaningful for ψ
        for c in 2 * d * d..jac.ncols() {
            let mut e = DVector::zeros(jac.ncols());
            e[c] = h;
            let plus = pure_residual(&prob, &apply_step(&pp, &e, m));
            e[c] = -h;
            let minus = pure_residual(&prob, &apply_step(&pp, &e, m));
            for row in 0..jac.nrows() {
                let fd = (plus[row] - minus[row]) / (2.0 * h);
                assert!((fd - jac[(row, c)]).abs() < 1e-6, "col {c} row {row}: {fd} vs {}", jac[(row, c)]);
            }
        }
    }

    #[test]
    fn traces_are_monotone_and_deterministic() {
        let t = chsh_target();
        let cfg = SeesawConfig { restarts: 3, max_outer_iters: 30, polish_iters: 0, seed: 11, ..Default::default() };
        let a = optimize(&t, &cfg).unwrap();
        let b = optimize(&t, &cfg).unwrap();
        for (ta, tb) in a.traces.iter().zip(&b.traces) {
            assert_eq!(ta.objective, tb.objective);
            assert!(ta.objective.windows(2).all(|w| w[1] <= w[0]));
        }
        let mut buf = Vec::new();
        a.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("restart,iter,objective\n0,0,"));
    }

    #[test]
    fn reaches_chsh_at_dimension_two() {
        let t = chsh_target();
        let res = optimize(&t, &SeesawConfig { seed: 1, ..Default::default() }).unwrap();
        assert!(res.distance <= 1e-6, "{}", res.distance);
        let s = res.strategy.unwrap();
        assert!(s.validate().is_valid());
        assert!(s.induce().unwrap().distance(&t, Metric::L2).unwrap() <= 1e-6);
    }

    #[test]
    fn dilation_reproduces_povm_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 2;
        let a = linalg::random_state(d * d, &mut rng);
        let b = linalg::random_state(d * d, &mut rng);
        let rho = (&a * a.adjoint()) * linalg::re(0.6) + (&b * b.adjoint()) * linalg::re(0.4);
        let mix = |rng: &mut ChaCha8Rng| -> Vec<CMat> {
            let p = random_projective(d, 3, rng);
            let q = random_projective(d, 3, rng);
            p.iter().zip(&q).map(|(p, q)| p * linalg::re(0.3) + q * linalg::re(0.7)).collect()
        };
        let st = PovmStrategy { dim: d, rho, alice: vec![mix(&mut rng), mix(&mut rng)], bob: vec![mix(&mut rng)] };
        let dil = st.dilate().unwrap();
        assert!(dil.validate().is_valid(), "{:?}", dil.validate());
        assert_eq!(dil.dims(), (2 * 3 * 2, 2 * 3));
        let p = dil.induce().unwrap();
        let q = st.induce().unwrap();
        assert!(p.distance(&q, Metric::MaxTv).unwrap() < 1e-10);
        assert_eq!(dil.element(Side::A, 0, 0).nrows(), 12);
    }

    #[test]
    fn truncation_upper_bound() {
        assert!(upper_bound_from_truncation(0.5, 5, Metric::MaxTv).is_err());
        assert!(upper_bound_from_truncation(0.5, 2, Metric::MaxTv).is_err());
        let b = upper_bound_from_truncation(0.5, 4, Metric::MaxTv).unwrap();
        assert!(b > 0.0 && b < 0.05);
        let tv = upper_bound_from_truncation(0.5, 16, Metric::MaxTv).unwrap();
        assert!(tv > 0.0 && tv <= 4.0 * 0.5f64.powi(32));
    }
}
