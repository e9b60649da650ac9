//! Schmidt spectra and multiset comparison of coefficient lists.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

/// Coefficients below this are treated as zero.
pub const ZERO_CUTOFF: f64 = 1e-9;
/// Relative tolerance for multiset matching.
pub const MULTISET_REL_TOL: f64 = 1e-8;

const STATE_NORM_TOL: f64 = 1e-10;

/// Descending, strictly positive Schmidt coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtSpectrum {
    pub coefficients: Vec<f64>,
    pub zero_cutoff: f64,
}

impl SchmidtSpectrum {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `Σ λ²`.
    pub fn weight(&self) -> f64 {
        self.coefficients.iter().map(|l| l * l).sum()
    }

    pub fn scaled(&self, factor: f64) -> SchmidtSpectrum {
        SchmidtSpectrum {
            coefficients: self.coefficients.iter().map(|l| l * factor).collect(),
            zero_cutoff: self.zero_cutoff,
        }
    }
}

/// `|ψ⟩ = Σ_k λ_k |u_k⟩|v_k⟩`; column `k` of `left`/`right` holds `u_k`/`v_k`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub spectrum: SchmidtSpectrum,
    pub left: CMat,
    pub right: CMat,
}

/// Schmidt decomposition of a unit vector.
pub fn schmidt(state: &CVec, d_a: usize, d_b: usize, zero_cutoff: f64) -> Result<SchmidtDecomposition> {
    let norm = state.norm();
    if (norm - 1.0).abs() > STATE_NORM_TOL {
        return Err(Error::InvalidStrategy(format!("state norm {norm} is not 1")));
    }
    schmidt_unnormalized(state, d_a, d_b, zero_cutoff)
}

/// Schmidt decomposition without the unit-norm precondition; coefficients
/// keep the vector's scale.
pub fn schmidt_unnormalized(state: &CVec, d_a: usize, d_b: usize, zero_cutoff: f64) -> Result<SchmidtDecomposition> {
    if state.len() != d_a * d_b {
        return Err(Error::Shape(format!("vector of length {} is not {d_a}×{d_b}", state.len())));
    }
    if !(zero_cutoff >= 0.0) {
        return Err(Error::param("zero_cutoff", "must be non-negative"));
    }
    let psi = linalg::coefficient_matrix(state, d_a, d_b);
    let svd = psi.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > zero_cutoff)
        .collect();
    kept.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let left = linalg::columns(&u, &kept);
    // Ψ = U Σ V† gives Bob vectors equal to the rows of V†, transposed
    let right = CMat::from_fn(d_b, kept.len(), |r, c| v_t[(kept[c], r)]);
    Ok(SchmidtDecomposition {
        spectrum: SchmidtSpectrum {
            coefficients: kept.iter().map(|&k| svd.singular_values[k]).collect(),
            zero_cutoff,
        },
        left,
        right,
    })
}

/// Greedy largest-first pairing of two multisets of positive reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultisetMatch {
    pub pairs: Vec<(f64, f64)>,
    pub unmatched_left: Vec<f64>,
    pub unmatched_right: Vec<f64>,
    pub max_abs_diff: f64,
}

impl MultisetMatch {
    pub fn is_exact(&self) -> bool {
        self.unmatched_left.is_empty() && self.unmatched_right.is_empty()
    }
}

fn descending(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn close(a: f64, b: f64, rel_tol: f64) -> bool {
    (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

pub fn match_multisets(left: &[f64], right: &[f64], rel_tol: f64) -> MultisetMatch {
    let (l, r) = (descending(left), descending(right));
    let (mut i, mut j) = (0, 0);
    let mut out = MultisetMatch { pairs: Vec::new(), unmatched_left: Vec::new(), unmatched_right: Vec::new(), max_abs_diff: 0.0 };
    while i < l.len() && j < r.len() {
        if close(l[i], r[j], rel_tol) {
            out.max_abs_diff = out.max_abs_diff.max((l[i] - r[j]).abs());
            out.pairs.push((l[i], r[j]));
            i += 1;
            j += 1;
        } else if l[i] > r[j] {
            out.unmatched_left.push(l[i]);
            i += 1;
        } else {
            out.unmatched_right.push(r[j]);
            j += 1;
        }
    }
    out.unmatched_left.extend_from_slice(&l[i..]);
    out.unmatched_right.extend_from_slice(&r[j..]);
    out
}

/// Multiset union, descending.
pub fn multiset_union(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    descending(&v)
}

/// `a \ b`: removes one matched copy of every element of `b` from `a`.
/// Errors when some element of `b` has no partner in `a`.
pub fn multiset_difference(a: &[f64], b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let m = match_multisets(a, b, rel_tol);
    if !m.unmatched_right.is_empty() {
        return Err(Error::Multiset(format!("{:?} not contained in the minuend", m.unmatched_right)));
    }
    Ok(m.unmatched_left)
}

#[derive(Debug, Clone, Serialize)]
pub struct SumCheck {
    /// Both reduced-density products vanish within tolerance.
    pub orthogonal: bool,
    /// `‖σ_A τ_A‖` for the reduced densities of `φ` and `η`.
    pub alice_overlap: f64,
    pub bob_overlap: f64,
    pub decomposition_residual: f64,
    /// Present when `orthogonal`: `Schmidt(ψ)` against `Schmidt(φ) ⊔ Schmidt(η)`.
    pub matching: Option<MultisetMatch>,
}

/// Checks that `ψ = φ + η` splits with orthogonal local supports, in which
/// case the Schmidt multiset of `ψ` is the union of those of `φ` and `η`.
pub fn schmidt_sum_check(psi: &CVec, phi: &CVec, eta: &CVec, d_a: usize, d_b: usize, tol: f64) -> Result<SumCheck> {
    for v in [psi, phi, eta] {
        if v.len() != d_a * d_b {
            return Err(Error::Shape(format!("vector of length {} is not {d_a}×{d_b}", v.len())));
        }
    }
    let decomposition_residual = (psi - phi - eta).norm();
    if decomposition_residual > tol {
        return Err(Error::residual("ψ = φ + η", decomposition_residual, tol));
    }
    let (f, e) = (linalg::coefficient_matrix(phi, d_a, d_b), linalg::coefficient_matrix(eta, d_a, d_b));
    let sigma_a = &f * f.adjoint();
    let tau_a = &e * e.adjoint();
    let sigma_b = f.transpose() * f.conjugate();
    let tau_b = e.transpose() * e.conjugate();
    let alice_overlap = linalg::operator_norm(&(sigma_a * tau_a));
    let bob_overlap = linalg::operator_norm(&(sigma_b * tau_b));
    let orthogonal = alice_overlap <= tol && bob_overlap <= tol;
    let matching = if orthogonal {
        let spec = |v: &CVec| schmidt_unnormalized(v, d_a, d_b, ZERO_CUTOFF).map(|d| d.spectrum.coefficients);
        let whole = spec(psi)?;
        let parts = multiset_union(&spec(phi)?, &spec(eta)?);
        let m = match_multisets(&whole, &parts, MULTISET_REL_TOL.max(tol));
        if !m.is_exact() {
            return Err(Error::Multiset(format!(
                "orthogonal split but spectra differ: {:?} vs {:?}",
                m.unmatched_left, m.unmatched_right
            )));
        }
        Some(m)
    } else {
        None
    };
    Ok(SumCheck { orthogonal, alice_overlap, bob_overlap, decomposition_residual, matching })
}
