//! Dense complex linear algebra helpers shared by the strategy, analysis and
//! see-saw modules.
//!
//! Bipartite vectors use the Alice-major layout: the amplitude of `|i⟩_A|j⟩_B`
//! lives at index `i * d_b + j`. [`coefficient_matrix`] and [`vectorize`]
//! convert between that layout and the `d_a × d_b` coefficient matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

/// Real matrix from row-major rows.
pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = if n == 0 { 0 } else { rows[0].len() };
    CMat::from_fn(n, m, |i, j| re(rows[i][j]))
}

pub fn basis_projector(d: usize, k: usize) -> CMat {
    let mut p = zeros(d);
    p[(k, k)] = ONE;
    p
}

/// `d_a × d_b` coefficient matrix of a bipartite vector.
pub fn coefficient_matrix(state: &CVec, d_a: usize, d_b: usize) -> CMat {
    CMat::from_fn(d_a, d_b, |i, j| state[i * d_b + j])
}

/// Inverse of [`coefficient_matrix`].
pub fn vectorize(coeffs: &CMat) -> CVec {
    let (d_a, d_b) = coeffs.shape();
    CVec::from_fn(d_a * d_b, |k, _| coeffs[(k / d_b, k % d_b)])
}

/// `(A ⊗ B) |ψ⟩` without forming the Kronecker product.
pub fn apply_local(a: &CMat, b: &CMat, state: &CVec) -> CVec {
    let psi = coefficient_matrix(state, a.ncols(), b.ncols());
    vectorize(&(a * psi * b.transpose()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_residual(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending; eigenvectors are the matching columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    // symmetrize first so round-off in the input cannot leak into the solver
    let h = (m + m.adjoint()) * re(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthogonal projector onto the span of the given orthonormal columns.
pub fn projector_from_columns(cols: &CMat) -> CMat {
    cols * cols.adjoint()
}

/// Selects a subset of columns.
pub fn columns(m: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Positive semidefinite square root of a Hermitian PSD matrix; negative
/// eigenvalues from round-off are clipped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let diag = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&v| re(v.max(0.0).sqrt())),
    ));
    &vecs * diag * vecs.adjoint()
}

/// Extends orthonormal columns to a full orthonormal basis of the ambient
/// space; the returned matrix holds only the added columns.
pub fn orthonormal_complement(cols: &CMat) -> CMat {
    let n = cols.nrows();
    let mut basis: Vec<CVec> = cols.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = CVec::zeros(n);
        v[k] = ONE;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.dotc(&v);
                v -= b * overlap;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / re(norm));
        }
    }
    let added = &basis[start..];
    CMat::from_fn(n, added.len(), |r, c| added[c][r])
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// phase correction of the R diagonal.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..d {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { ONE };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Haar-random unit vector.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
    let v = CVec::from_fn(d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = v.norm();
    v / re(n)
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
