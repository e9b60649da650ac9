//! Strategy-level direct-sum decomposition: when the induced correlation
//! splits into answer blocks, the state and the measurements split along
//! matching local subspaces.

use serde::Serialize;

use crate::correlation::{block_structure_check, BlockLayout};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::strategy::{Side, Strategy};

/// Largest residual of each checked identity, over all blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BlockDiagnostics {
    /// `max_x ‖Π^{A_i}_{A_x}ψ − Π^{A_i}_{A_0}ψ‖`, same for Bob.
    pub question_independence: f64,
    /// `‖Π^{A_i}ψ − Π^{B_i}ψ‖`
    pub side_agreement: f64,
    /// `|‖ψ_i‖² − ω_i|`
    pub weight_mismatch: f64,
    /// `max |⟨ψ_i|ψ_j⟩|`, `i ≠ j`
    pub orthogonality: f64,
    /// `‖R² − R‖` for restricted elements `R = U†ΠU`.
    pub idempotence: f64,
    /// `‖ΠU − UR‖`: the block subspace is invariant.
    pub invariance: f64,
    /// `‖ψ_i‖ − ‖(U_A† ⊗ U_B†)ψ_i‖`: the sub-state lives on the block subspaces.
    pub support_loss: f64,
    /// Max entry difference between a restricted strategy's correlation and
    /// the normalized block of the original correlation.
    pub induced_mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecomposition {
    pub weights: Vec<f64>,
    /// `(dim H_A^i, dim H_B^i)`
    pub dims: Vec<(usize, usize)>,
    /// Normalized restricted strategies; `None` for zero-weight blocks.
    pub blocks: Vec<Option<Strategy>>,
    pub diagnostics: BlockDiagnostics,
    /// Unnormalized `|ψ_i⟩ = Π^{A_i}|ψ⟩`.
    #[serde(skip)]
    pub substates: Vec<CVec>,
    /// Orthonormal bases (as columns) of `H_A^i` and `H_B^i`.
    #[serde(skip)]
    pub alice_bases: Vec<CMat>,
    #[serde(skip)]
    pub bob_bases: Vec<CMat>,
}

/// Orthonormal basis of eigenvectors with eigenvalue above `cutoff`.
fn support(rho: &CMat, cutoff: f64) -> CMat {
    let (vals, vecs) = linalg::eigh(rho);
    let idx: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > cutoff).collect();
    linalg::columns(&vecs, &idx)
}

fn check(name: &str, value: f64, tol: f64) -> Result<()> {
    if value > tol {
        return Err(Error::residual(name, value, tol));
    }
    Ok(())
}

/// Restricts every element of the answers in `class` to the subspace
/// spanned by `basis`, tracking the idempotence and invariance residuals.
fn restrict_side(
    meas: &[Vec<CMat>],
    class: &[usize],
    basis: &CMat,
    diag: &mut BlockDiagnostics,
) -> Vec<Vec<CMat>> {
    meas.iter()
        .map(|q| {
            class
                .iter()
                .map(|&a| {
                    let r = basis.adjoint() * &q[a] * basis;
                    diag.idempotence = diag.idempotence.max(linalg::frobenius(&(&r * &r - &r)));
                    diag.invariance = diag.invariance.max(linalg::frobenius(&(&q[a] * basis - basis * &r)));
                    r
                })
                .collect()
        })
        .collect()
}

pub fn strategy_block_decompose(s: &Strategy, layout: &BlockLayout, tol: f64) -> Result<BlockDecomposition> {
    let structure = block_structure_check(&s.induce()?, layout, tol)?;
    let (m, n) = s.questions();
    let (d_a, d_b) = s.dims();
    let mut diag = BlockDiagnostics::default();
    let mut out = BlockDecomposition {
        weights: structure.weights.clone(),
        dims: Vec::new(),
        blocks: Vec::new(),
        diagnostics: BlockDiagnostics::default(),
        substates: Vec::new(),
        alice_bases: Vec::new(),
        bob_bases: Vec::new(),
    };

    for (i, expected) in structure.blocks.iter().enumerate() {
        let (ca, cb) = (&layout.alice[i], &layout.bob[i]);
        let psi_i = s.projected_substate(Side::A, 0, ca)?;
        for x in 1..m {
            let r = (s.projected_substate(Side::A, x, ca)? - &psi_i).norm();
            diag.question_independence = diag.question_independence.max(r);
        }
        let bob_0 = s.projected_substate(Side::B, 0, cb)?;
        for y in 1..n {
            let r = (s.projected_substate(Side::B, y, cb)? - &bob_0).norm();
            diag.question_independence = diag.question_independence.max(r);
        }
        check("question independence of block projections", diag.question_independence, tol)?;
        diag.side_agreement = diag.side_agreement.max((&psi_i - &bob_0).norm());
        check("Alice/Bob agreement of block projections", diag.side_agreement, tol)?;

        let omega = structure.weights[i];
        diag.weight_mismatch = diag.weight_mismatch.max((psi_i.norm_squared() - omega).abs());
        check("block weight", diag.weight_mismatch, tol)?;
        for prev in &out.substates {
            diag.orthogonality = diag.orthogonality.max(prev.dotc(&psi_i).norm());
        }
        check("orthogonality of block sub-states", diag.orthogonality, tol)?;

        let coeffs = linalg::coefficient_matrix(&psi_i, d_a, d_b);
        let cutoff = tol * tol;
        let u_a = support(&(&coeffs * coeffs.adjoint()), cutoff);
        let u_b = support(&(coeffs.transpose() * coeffs.conjugate()), cutoff);

        let block = match expected {
            Some(expected) if u_a.ncols() > 0 && u_b.ncols() > 0 => {
                let alice = restrict_side(s.alice(), ca, &u_a, &mut diag);
                let bob = restrict_side(s.bob(), cb, &u_b, &mut diag);
                check("idempotence of restricted elements", diag.idempotence, tol)?;
                check("invariance of block subspaces", diag.invariance, tol)?;
                // (U_A† ⊗ U_B†)ψ_i has coefficient matrix U_A† Ψ_i conj(U_B)
                let local = u_a.adjoint() * &coeffs * u_b.conjugate();
                let phi = linalg::vectorize(&local);
                diag.support_loss = diag.support_loss.max((psi_i.norm() - phi.norm()).abs());
                check("support of block sub-state", diag.support_loss, tol)?;
                let phi = &phi / linalg::re(phi.norm());
                let restricted = Strategy::new(u_a.ncols(), u_b.ncols(), phi, alice, bob)?;
                let induced = restricted.induce()?;
                for x in 0..m {
                    for y in 0..n {
                        let d = induced.table(x, y).max_abs_diff(&expected.table(x, y));
                        diag.induced_mismatch = diag.induced_mismatch.max(d);
                    }
                }
                check("restricted strategy reproduces its block", diag.induced_mismatch, tol)?;
                Some(restricted)
            }
            _ => None,
        };
        out.dims.push((u_a.ncols(), u_b.ncols()));
        out.blocks.push(block);
        out.substates.push(psi_i);
        out.alice_bases.push(u_a);
        out.bob_bases.push(u_b);
    }
    out.diagnostics = diag;
    Ok(out)
}
