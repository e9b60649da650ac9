//! Chains `λ, αλ, α²λ, …` inside a Schmidt spectrum.

use serde::Serialize;

use crate::analysis::schmidt::SchmidtSpectrum;
use crate::error::{Error, Result};

/// Maximal chains as index lists into `coefficients` (descending).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentChain {
    pub ratio: f64,
    pub rel_tol: f64,
    pub coefficients: Vec<f64>,
    pub chains: Vec<Vec<usize>>,
    pub max_length: usize,
}

impl DescentChain {
    pub fn values(&self, chain: usize) -> Vec<f64> {
        self.chains[chain].iter().map(|&i| self.coefficients[i]).collect()
    }
}

/// Links each coefficient to the largest unused successor whose ratio to
/// it lies in `[α(1−tol), α(1+tol)]`, heads taken largest first. Degenerate
/// coefficients are separate multiset members; a chain consumes one of them.
pub fn descent_chain(spectrum: &SchmidtSpectrum, ratio: f64, rel_tol: f64) -> Result<DescentChain> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param("ratio", format!("{ratio} not in (0, 1)")));
    }
    if !(rel_tol >= 0.0 && rel_tol < (1.0 - ratio) / 2.0) {
        return Err(Error::param("rel_tol", format!("{rel_tol} must lie in [0, {})", (1.0 - ratio) / 2.0)));
    }
    let mut coefficients = spectrum.coefficients.clone();
    coefficients.sort_by(|a, b| b.total_cmp(a));
    let (lo, hi) = (ratio * (1.0 - rel_tol), ratio * (1.0 + rel_tol));
    let n = coefficients.len();
    let mut used = vec![false; n];
    let mut chains = Vec::new();
    for head in 0..n {
        if used[head] {
            continue;
        }
        used[head] = true;
        let mut chain = vec![head];
        let mut cur = head;
        while let Some(next) = (cur + 1..n).find(|&j| {
            let q = coefficients[j] / coefficients[cur];
            !used[j] && (lo..=hi).contains(&q)
        }) {
            used[next] = true;
            chain.push(next);
            cur = next;
        }
        chains.push(chain);
    }
    let max_length = chains.iter().map(Vec::len).max().unwrap_or(0);
    Ok(DescentChain { ratio, rel_tol, coefficients, chains, max_length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spectrum(c: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum { coefficients: c.to_vec(), zero_cutoff: 1e-9 }
    }

    #[test]
    fn geometric_is_one_chain() {
        let c = descent_chain(&spectrum(&[0.8677218, 0.4338609, 0.2169305, 0.1084652]), 0.5, 1e-6).unwrap();
        assert_eq!(c.chains, vec![vec![0, 1, 2, 3]]);
        assert_eq!(c.max_length, 4);
    }

    #[test]
    fn epr_gives_singletons() {
        let c = descent_chain(&spectrum(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]), 0.5, 1e-6).unwrap();
        assert_eq!(c.chains.len(), 2);
        assert_eq!(c.max_length, 1);
    }

    #[test]
    fn degenerate_members_split_between_chains() {
        let c = descent_chain(&spectrum(&[1.0, 1.0, 0.5, 0.5, 0.25]), 0.5, 1e-9).unwrap();
        assert_eq!(c.chains, vec![vec![0, 2, 4], vec![1, 3]]);
        assert_eq!(c.values(1), vec![1.0, 0.5]);
    }

    #[test]
    fn tolerance_bounds() {
        let s = spectrum(&[1.0]);
        assert!(descent_chain(&s, 0.5, 0.25).is_err());
        assert!(descent_chain(&s, 0.5, 0.2499).is_ok());
        assert!(descent_chain(&s, 1.0, 0.0).is_err());
        assert_eq!(descent_chain(&spectrum(&[]), 0.5, 0.1).unwrap().max_length, 0);
    }
}
