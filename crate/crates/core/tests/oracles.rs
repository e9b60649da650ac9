//! Values computed outside the library and frozen here.
//!
//! The brute-force oracle below builds the ideal measurements at a large
//! cutoff directly from the pairing rules, with no code shared with the
//! crate, and sums `⟨ψ|Π⊗Π|ψ⟩` with the unnormalized geometric state.

use qsep::analysis::{schmidt, ZERO_CUTOFF};
use qsep::linalg;
use qsep::separating::{exact_pstar, ideal_truncated_strategy, truncation_distance, TruncationSpec};
use qsep::Metric;

/// `cos φ σ^z + sin φ σ^x` as a real 2×2 array.
fn rotated(phi: f64) -> [[f64; 2]; 2] {
    let (s, c) = phi.sin_cos();
    [[c, s], [s, -c]]
}

/// Element `answer` of one question at cutoff `n`, as a dense real matrix.
/// Even pairing: `(2m, 2m+1)`, `+1 → 0`, `−1 → 1`. Odd pairing:
/// `(2m+1, 2m+2)`, `−1 → 0`, `+1 → 1`, `|0⟩ → 2`.
fn element(n: usize, odd: bool, local: [[f64; 2]; 2], answer: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; n];
    let offset = usize::from(odd);
    let sign = match (odd, answer) {
        (false, 0) | (true, 1) => 1.0,
        (false, 1) | (true, 0) => -1.0,
        _ => 0.0,
    };
    if odd && answer == 2 {
        out[0][0] = 1.0;
        return out;
    }
    if sign == 0.0 {
        return out;
    }
    let mut m = 0;
    while offset + 2 * m + 1 < n {
        let base = offset + 2 * m;
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 1.0 } else { 0.0 };
                out[base + r][base + c] = 0.5 * (id + sign * local[r][c]);
            }
        }
        m += 1;
    }
    out
}

fn brute_force(alpha: f64, x: usize, y: usize, a: usize, b: usize) -> f64 {
    let n = 120;
    let mu = (2.0 * alpha / (1.0 + alpha * alpha)).atan();
    let sx = [[0.0, 1.0], [1.0, 0.0]];
    let alice = [(false, rotated(0.0)), (false, sx), (true, rotated(0.0)), (true, sx)];
    let bob = [(false, rotated(mu)), (false, rotated(-mu)), (true, rotated(mu)), (true, rotated(-mu)), (false, rotated(0.0))];
    let p = element(n, alice[x].0, alice[x].1, a);
    let q = element(n, bob[y].0, bob[y].1, b);
    let scale = 1.0 - alpha * alpha;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += alpha.powi((i + j) as i32) * p[i][j] * q[i][j];
        }
    }
    scale * acc
}

#[test]
fn exact_correlation_matches_brute_force_sum() {
    for alpha in [0.3, 0.5, 0.7] {
        let p = exact_pstar(alpha, 1e-12).unwrap();
        for x in 0..4 {
            for y in 0..5 {
                for a in 0..3 {
                    for b in 0..3 {
                        let want = brute_force(alpha, x, y, a, b);
                        let got = p.get(x, y, a, b);
                        assert!((got - want).abs() < 1e-12, "alpha {alpha} ({x},{y},{a},{b}): {got} vs {want}");
                    }
                }
            }
        }
    }
}

#[test]
fn unprinted_cross_pairs() {
    // numpy, cutoff 80, alpha = 0.5
    let frozen: [((usize, usize), [[f64; 3]; 3]); 4] = [
        ((0, 2), [[0.04452172023607574, 0.005478279763924241, 0.75], [0.021913119055696963, 0.178086880944303, 0.0], [0.0; 3]]),
        ((1, 3), [[0.03321741964588635, 0.09178258035411359, 0.375], [0.03321741964588635, 0.09178258035411359, 0.375], [0.0; 3]]),
        ((2, 0), [[0.04452172023607574, 0.005478279763924241, 0.0], [0.021913119055696963, 0.178086880944303, 0.0], [0.6678258035411362, 0.08217419645886362, 0.0]]),
        ((3, 4), [[0.025, 0.1, 0.0], [0.025, 0.1, 0.0], [0.75, 0.0, 0.0]]),
    ];
    let p = exact_pstar(0.5, 1e-12).unwrap();
    for ((x, y), table) in frozen {
        for a in 0..3 {
            for b in 0..3 {
                assert!((p.get(x, y, a, b) - table[a][b]).abs() < 1e-12, "({x},{y},{a},{b})");
            }
        }
    }
}

#[test]
fn truncation_distances() {
    // numpy, exact side summed to cutoff 80
    let frozen = [
        (2, 0.011144245413153437, 0.023646254614946405),
        (3, 0.0006939640000864192, 0.001472477393604579),
        (4, 4.336282261936035e-05, 9.200877282109182e-05),
        (6, 1.6938345137108325e-07, 3.594038062373728e-07),
        (8, 6.616540136963889e-10, 1.4039208668751058e-09),
    ];
    for (m, tv, l2) in frozen {
        let got_tv = truncation_distance(0.5, m, Metric::MaxTv).unwrap();
        let got_l2 = truncation_distance(0.5, m, Metric::L2).unwrap();
        assert!((got_tv - tv).abs() <= 1e-9 * tv + 1e-15, "M={m}: {got_tv} vs {tv}");
        assert!((got_l2 - l2).abs() <= 1e-9 * l2 + 1e-15, "M={m}: {got_l2} vs {l2}");
    }
}

#[test]
fn schmidt_spectrum_matches_reduced_density_eigenvalues() {
    let s = ideal_truncated_strategy(&TruncationSpec::new(0.5, 3).unwrap()).unwrap();
    let (d_a, d_b) = s.dims();
    let svd_route = schmidt(s.state(), d_a, d_b, ZERO_CUTOFF).unwrap().spectrum.coefficients;
    let psi = s.coefficients();
    let (vals, _) = linalg::eigh(&(&psi * psi.adjoint()));
    let mut eig_route: Vec<f64> = vals.into_iter().filter(|v| *v > 1e-18).map(f64::sqrt).collect();
    eig_route.reverse();
    assert_eq!(svd_route.len(), eig_route.len());
    for (a, b) in svd_route.iter().zip(&eig_route) {
        assert!((a - b).abs() < 1e-12);
    }
    // closed form: normalized geometric sequence
    let norm = (0..6).map(|i| 0.25f64.powi(i)).sum::<f64>().sqrt();
    for (i, a) in svd_route.iter().enumerate() {
        assert!((a - 0.5f64.powi(i as i32) / norm).abs() < 1e-14);
    }
}
