//! The tilted CHSH family: parameters, the two-qubit strategy attaining the
//! quantum maximum `√(8 + 2β²)`, and the Bell functional itself.

use serde::Serialize;

use crate::correlation::CorrelationTable;
use crate::error::{Error, Result};
use crate::linalg::{self, from_real_rows, CMat, CVec};
use crate::strategy::{AnswerRouting, Observable, Side, Strategy};

const PARAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltedChshParams {
    pub beta: f64,
    pub theta: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl TiltedChshParams {
    /// `sin 2θ` as implied by `β`.
    pub fn sin_two_theta(beta: f64) -> f64 {
        ((4.0 - beta * beta) / (4.0 + beta * beta)).sqrt()
    }

    /// Residual of the defining relations; zero for consistent parameters.
    pub fn consistency_residual(&self) -> f64 {
        let s = Self::sin_two_theta(self.beta);
        [
            ((2.0 * self.theta).sin() - s).abs(),
            (self.mu - s.atan()).abs(),
            (self.alpha - self.theta.tan()).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<()> {
        let res = self.consistency_residual();
        if res > PARAM_TOL {
            return Err(Error::residual("tilted CHSH parameter relations", res, PARAM_TOL));
        }
        Ok(())
    }

    /// `σ_α^z = cos μ σ^z + sin μ σ^x`.
    pub fn sigma_alpha_z(&self) -> CMat {
        rotated_pauli(self.mu)
    }

    /// `σ_α^x = cos μ σ^z − sin μ σ^x`.
    pub fn sigma_alpha_x(&self) -> CMat {
        rotated_pauli(-self.mu)
    }
}

/// `cos φ σ^z + sin φ σ^x`.
pub fn rotated_pauli(phi: f64) -> CMat {
    let (s, c) = phi.sin_cos();
    from_real_rows(&[&[c, s], &[s, -c]])
}

pub fn sigma_z() -> CMat {
    rotated_pauli(0.0)
}

pub fn sigma_x() -> CMat {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn params_from_beta(beta: f64) -> Result<TiltedChshParams> {
    if !(0.0..=2.0).contains(&beta) {
        return Err(Error::param("beta", format!("{beta} not in [0, 2]")));
    }
    let s = TiltedChshParams::sin_two_theta(beta);
    let theta = 0.5 * s.clamp(-1.0, 1.0).asin();
    Ok(TiltedChshParams { beta, theta, mu: s.atan(), alpha: theta.tan() })
}

/// Inverse map: `β = 2(1 − α²)/√(1 + 6α² + α⁴)`, with `θ = arctan α` and
/// `μ = arctan(2α/(1 + α²))`.
pub fn params_from_alpha(alpha: f64) -> Result<TiltedChshParams> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} not in [0, 1]")));
    }
    let a2 = alpha * alpha;
    let beta = 2.0 * (1.0 - a2) / (1.0 + 6.0 * a2 + a2 * a2).sqrt();
    let theta = alpha.atan();
    let mu = (2.0 * alpha / (1.0 + a2)).atan();
    Ok(TiltedChshParams { beta: beta.clamp(0.0, 2.0), theta, mu, alpha })
}

/// Two-qubit strategy `cos θ(|00⟩ + α|11⟩)`, `A_0 = σ^z`, `A_1 = σ^x`,
/// `B_0 = σ_α^z`, `B_1 = σ_α^x`; the `+1` eigenspace is answer 0.
pub fn ideal_strategy(p: &TiltedChshParams) -> Result<Strategy> {
    p.check()?;
    let routing = AnswerRouting::binary(0, 1);
    let meas = |o: CMat| Observable::new(o)?.to_projectors(routing, 2);
    let c = p.theta.cos();
    let state = CVec::from_vec(vec![
        linalg::re(c),
        linalg::ZERO,
        linalg::ZERO,
        linalg::re(c * p.alpha),
    ]);
    Strategy::new(
        2,
        2,
        state,
        vec![meas(sigma_z())?, meas(sigma_x())?],
        vec![meas(p.sigma_alpha_z())?, meas(p.sigma_alpha_x())?],
    )
}

/// `⟨ψ| βA_0 + A_0B_0 + A_0B_1 + A_1B_0 − A_1B_1 |ψ⟩` with `A_x = Π^0 − Π^1`
/// (any further answers contribute eigenvalue 0).
pub fn bell_value(s: &Strategy, beta: f64) -> Result<f64> {
    let (m, n) = s.questions();
    let (r, t) = s.answers();
    if m < 2 || n < 2 || r < 2 || t < 2 {
        return Err(Error::Shape(format!(
            "tilted CHSH needs 2 questions and 2 answers per side, got {m}×{n} questions, {r}×{t} answers"
        )));
    }
    let obs = |side: Side, q: usize| s.element(side, q, 0) - s.element(side, q, 1);
    let (a0, a1) = (obs(Side::A, 0), obs(Side::A, 1));
    let (b0, b1) = (obs(Side::B, 0), obs(Side::B, 1));
    let (_, d_b) = s.dims();
    let psi = s.state();
    let expect = |a: &CMat, b: &CMat| psi.dotc(&linalg::apply_local(a, b, psi)).re;
    let id_b = linalg::identity(d_b);
    Ok(beta * expect(&a0, &id_b) + expect(&a0, &b0) + expect(&a0, &b1) + expect(&a1, &b0)
        - expect(&a1, &b1))
}

/// Quantum maximum of the tilted functional.
pub fn quantum_bound(beta: f64) -> f64 {
    (8.0 + 2.0 * beta * beta).sqrt()
}

/// Bound over product states.
pub fn local_bound(beta: f64) -> f64 {
    2.0 + beta
}

/// Table for questions `(x, y)` of the correlation induced by the ideal
/// strategy.
pub fn ideal_table(p: &TiltedChshParams, x: usize, y: usize) -> Result<CorrelationTable> {
    if x > 1 || y > 1 {
        return Err(Error::param("question", format!("({x}, {y}) is not a tilted CHSH question pair")));
    }
    Ok(ideal_strategy(p)?.induce()?.table(x, y))
}
