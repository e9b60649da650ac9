//! Bipartite correlations `p(a,b|x,y)` over finite question and answer sets.
//!
//! A [`Correlation`] is stored as a flat row-major array indexed
//! `[x][y][a][b]`. Values are immutable after construction and every table is
//! checked to be a probability distribution.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `Σ_{a,b} p(a,b|x,y) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Negative entries at least this close to zero are clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrelationJson", into = "CorrelationJson")]
pub struct Correlation {
    m: usize,
    n: usize,
    r: usize,
    s: usize,
    table: Vec<f64>,
}

/// One `(x, y)` slice of a correlation: an `r × s` matrix of probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub x: usize,
    pub y: usize,
    pub entries: Vec<Vec<f64>>,
}

impl CorrelationTable {
    pub fn new(x: usize, y: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        let r = entries.len();
        if r == 0 || entries.iter().any(|row| row.len() != entries[0].len() || row.is_empty()) {
            return Err(Error::Shape("correlation table rows must be non-empty and equal length".into()));
        }
        let mut entries = entries;
        for (a, row) in entries.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = clamp_entry(*v, x, y, a, b)?;
            }
        }
        let sum: f64 = entries.iter().flatten().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization { x, y, sum, tol: NORMALIZATION_TOL });
        }
        Ok(CorrelationTable { x, y, entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a][b]
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &CorrelationTable) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }
}

/// Disjoint answer-index classes covering `[0, r)` for Alice and `[0, s)` for
/// Bob. Class `i` of Alice pairs with class `i` of Bob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub alice: Vec<Vec<usize>>,
    pub bob: Vec<Vec<usize>>,
}

impl BlockLayout {
    pub fn new(alice: Vec<Vec<usize>>, bob: Vec<Vec<usize>>) -> Self {
        BlockLayout { alice, bob }
    }

    pub fn blocks(&self) -> usize {
        self.alice.len()
    }

    pub fn validate(&self, r: usize, s: usize) -> Result<()> {
        if self.alice.len() != self.bob.len() {
            return Err(Error::Partition(format!(
                "Alice has {} classes but Bob has {}",
                self.alice.len(),
                self.bob.len()
            )));
        }
        check_partition(&self.alice, r, "Alice")?;
        check_partition(&self.bob, s, "Bob")
    }

    /// Contiguous layout for blocks with the given answer counts, as produced
    /// by [`direct_sum`].
    pub fn contiguous(sizes: &[(usize, usize)]) -> Self {
        let (mut ra, mut rb) = (0, 0);
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        for &(r, s) in sizes {
            alice.push((ra..ra + r).collect());
            bob.push((rb..rb + s).collect());
            ra += r;
            rb += s;
        }
        BlockLayout { alice, bob }
    }
}

fn check_partition(classes: &[Vec<usize>], size: usize, who: &str) -> Result<()> {
    let mut seen = vec![false; size];
    for class in classes {
        for &a in class {
            if a >= size {
                return Err(Error::Partition(format!("{who} answer {a} out of range 0..{size}")));
            }
            if seen[a] {
                return Err(Error::Partition(format!("{who} answer {a} appears twice")));
            }
            seen[a] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("{who} answer {missing} is not covered")));
    }
    Ok(())
}

/// A block layout together with block weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub layout: BlockLayout,
    pub weights: Vec<f64>,
}

impl BlockSpec {
    pub fn new(layout: BlockLayout, weights: Vec<f64>, r: usize, s: usize) -> Result<Self> {
        layout.validate(r, s)?;
        check_weights(&weights)?;
        if weights.len() != layout.blocks() {
            return Err(Error::Partition(format!(
                "{} weights for {} blocks",
                weights.len(),
                layout.blocks()
            )));
        }
        Ok(BlockSpec { layout, weights })
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::param("weights", "must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::param("weights", format!("sum to {total}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Worst-case total variation over question pairs.
    #[default]
    MaxTv,
    /// Euclidean norm over all entries.
    L2,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_tv" => Ok(Metric::MaxTv),
            "l2" => Ok(Metric::L2),
            other => Err(Error::param("metric", format!("unknown metric `{other}`"))),
        }
    }
}

fn clamp_entry(v: f64, x: usize, y: usize, a: usize, b: usize) -> Result<f64> {
    if !v.is_finite() || v < -NEGATIVE_CLAMP {
        return Err(Error::NegativeEntry { x, y, a, b, value: v });
    }
    Ok(v.max(0.0))
}

impl Correlation {
    /// Builds a correlation from a flat `[x][y][a][b]` array with the default
    /// normalization tolerance.
    pub fn new(m: usize, n: usize, r: usize, s: usize, table: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(m, n, r, s, table, NORMALIZATION_TOL)
    }

    pub fn with_tolerance(
        m: usize,
        n: usize,
        r: usize,
        s: usize,
        mut table: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if m == 0 || n == 0 || r == 0 || s == 0 {
            return Err(Error::Shape(format!("empty dimensions m={m} n={n} r={r} s={s}")));
        }
        if table.len() != m * n * r * s {
            return Err(Error::Shape(format!(
                "table has {} entries, expected {}",
                table.len(),
                m * n * r * s
            )));
        }
        for x in 0..m {
            for y in 0..n {
                let base = ((x * n) + y) * r * s;
                let mut sum = 0.0;
                for a in 0..r {
                    for b in 0..s {
                        let k = base + a * s + b;
                        table[k] = clamp_entry(table[k], x, y, a, b)?;
                        sum += table[k];
                    }
                }
                if (sum - 1.0).abs() > tol {
                    return Err(Error::Normalization { x, y, sum, tol });
                }
            }
        }
        Ok(Correlation { m, n, r, s, table })
    }

    /// Builds a correlation from `m · n` tables listed in `(x, y)` row-major
    /// order.
    pub fn from_tables(m: usize, n: usize, tables: &[CorrelationTable]) -> Result<Self> {
        if tables.len() != m * n {
            return Err(Error::Shape(format!("{} tables for {m}×{n} questions", tables.len())));
        }
        let r = tables[0].rows();
        let s = tables[0].cols();
        let mut flat = Vec::with_capacity(m * n * r * s);
        for t in tables {
            if t.rows() != r || t.cols() != s {
                return Err(Error::Shape("tables disagree on answer counts".into()));
            }
            flat.extend(t.entries.iter().flatten());
        }
        Correlation::new(m, n, r, s, flat)
    }

    /// Correlation that answers `(a, b)` with certainty on every question pair.
    pub fn deterministic(m: usize, n: usize, r: usize, s: usize, a: usize, b: usize) -> Result<Self> {
        if a >= r || b >= s {
            return Err(Error::Shape("deterministic answer out of range".into()));
        }
        let mut table = vec![0.0; m * n * r * s];
        for x in 0..m {
            for y in 0..n {
                table[(((x * n) + y) * r + a) * s + b] = 1.0;
            }
        }
        Correlation::new(m, n, r, s, table)
    }

    pub fn questions(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn answers(&self) -> (usize, usize) {
        (self.r, self.s)
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.m, self.n, self.r, self.s)
    }

    #[inline]
    fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        (((x * self.n) + y) * self.r + a) * self.s + b
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.table[self.index(x, y, a, b)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.table
    }

    pub fn table(&self, x: usize, y: usize) -> CorrelationTable {
        let entries = (0..self.r)
            .map(|a| (0..self.s).map(|b| self.get(x, y, a, b)).collect())
            .collect();
        CorrelationTable { x, y, entries }
    }

    pub fn tables(&self) -> impl Iterator<Item = CorrelationTable> + '_ {
        (0..self.m).flat_map(move |x| (0..self.n).map(move |y| self.table(x, y)))
    }

    /// Restriction to the listed questions; answers are unchanged. Questions
    /// are renumbered in the order given.
    pub fn restrict(&self, xs: &[usize], ys: &[usize]) -> Result<Correlation> {
        check_subset(xs, self.m, "xs")?;
        check_subset(ys, self.n, "ys")?;
        let mut flat = Vec::with_capacity(xs.len() * ys.len() * self.r * self.s);
        for &x in xs {
            for &y in ys {
                let base = self.index(x, y, 0, 0);
                flat.extend_from_slice(&self.table[base..base + self.r * self.s]);
            }
        }
        Ok(Correlation { m: xs.len(), n: ys.len(), r: self.r, s: self.s, table: flat })
    }

    /// Relabels answers: Alice's answer `a` becomes `alice_perm[a]` and Bob's
    /// `b` becomes `bob_perm[b]`.
    pub fn permute_answers(&self, alice_perm: &[usize], bob_perm: &[usize]) -> Result<Correlation> {
        check_permutation(alice_perm, self.r)?;
        check_permutation(bob_perm, self.s)?;
        let mut flat = vec![0.0; self.table.len()];
        for x in 0..self.m {
            for y in 0..self.n {
                for a in 0..self.r {
                    for b in 0..self.s {
                        let k = self.index(x, y, alice_perm[a], bob_perm[b]);
                        flat[k] = self.get(x, y, a, b);
                    }
                }
            }
        }
        Ok(Correlation { table: flat, ..self.clone() })
    }

    /// Appends zero-probability answers so the answer sets have sizes `r`, `s`.
    pub fn pad_answers(&self, r: usize, s: usize) -> Result<Correlation> {
        if r < self.r || s < self.s {
            return Err(Error::Shape("padding cannot shrink answer sets".into()));
        }
        let mut flat = vec![0.0; self.m * self.n * r * s];
        for x in 0..self.m {
            for y in 0..self.n {
                for a in 0..self.r {
                    for b in 0..self.s {
                        flat[(((x * self.n) + y) * r + a) * s + b] = self.get(x, y, a, b);
                    }
                }
            }
        }
        Ok(Correlation { m: self.m, n: self.n, r, s, table: flat })
    }

    pub fn distance(&self, other: &Correlation, metric: Metric) -> Result<f64> {
        distance(self, other, metric)
    }

    /// CSV with header `x,y,a,b,value`, one row per entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["x", "y", "a", "b", "value"]).map_err(ser)?;
        for x in 0..self.m {
            for y in 0..self.n {
                for a in 0..self.r {
                    for b in 0..self.s {
                        w.write_record(&[
                            x.to_string(),
                            y.to_string(),
                            a.to_string(),
                            b.to_string(),
                            self.get(x, y, a, b).to_string(),
                        ])
                        .map_err(ser)?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn check_subset(qs: &[usize], size: usize, name: &'static str) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::param(name, "question subset is empty"));
    }
    if let Some(q) = qs.iter().find(|&&q| q >= size) {
        return Err(Error::param(name, format!("question {q} out of range 0..{size}")));
    }
    Ok(())
}

fn check_permutation(perm: &[usize], size: usize) -> Result<()> {
    let mut seen = vec![false; size];
    if perm.len() != size {
        return Err(Error::Shape(format!("permutation has length {}, expected {size}", perm.len())));
    }
    for &p in perm {
        if p >= size || seen[p] {
            return Err(Error::Shape(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Direct sum `⊕ ω_i p_i`: answers of block `i` occupy a contiguous index
/// range following those of block `i-1`, and `p(a,b|x,y) = δ_ij ω_i p_i(a,b|x,y)`.
pub fn direct_sum(blocks: &[(f64, Correlation)]) -> Result<Correlation> {
    let Some((_, first)) = blocks.first() else {
        return Err(Error::param("blocks", "direct sum needs at least one block"));
    };
    let (m, n) = first.questions();
    if let Some((_, bad)) = blocks.iter().find(|(_, p)| p.questions() != (m, n)) {
        return Err(Error::Shape(format!(
            "block has {:?} questions, expected {:?}",
            bad.questions(),
            (m, n)
        )));
    }
    let weights: Vec<f64> = blocks.iter().map(|(w, _)| *w).collect();
    check_weights(&weights)?;

    let r: usize = blocks.iter().map(|(_, p)| p.r).sum();
    let s: usize = blocks.iter().map(|(_, p)| p.s).sum();
    let mut table = vec![0.0; m * n * r * s];
    let (mut ra, mut sb) = (0, 0);
    for (w, p) in blocks {
        for x in 0..m {
            for y in 0..n {
                for a in 0..p.r {
                    for b in 0..p.s {
                        table[(((x * n) + y) * r + ra + a) * s + sb + b] = w * p.get(x, y, a, b);
                    }
                }
            }
        }
        ra += p.r;
        sb += p.s;
    }
    Correlation::new(m, n, r, s, table)
}

/// Recovered direct-sum structure: block weights and normalized blocks
/// (`None` for blocks whose weight is within tolerance of zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockStructure {
    pub weights: Vec<f64>,
    pub blocks: Vec<Option<Correlation>>,
}

/// Verifies that `p` is a direct sum over `layout` and recovers the weights
/// and blocks.
pub fn block_structure_check(p: &Correlation, layout: &BlockLayout, tol: f64) -> Result<BlockStructure> {
    layout.validate(p.r, p.s)?;
    let (m, n) = p.questions();
    let mut owner_a = vec![0; p.r];
    let mut owner_b = vec![0; p.s];
    for (i, class) in layout.alice.iter().enumerate() {
        class.iter().for_each(|&a| owner_a[a] = i);
    }
    for (i, class) in layout.bob.iter().enumerate() {
        class.iter().for_each(|&b| owner_b[b] = i);
    }
    for x in 0..m {
        for y in 0..n {
            for a in 0..p.r {
                for b in 0..p.s {
                    let v = p.get(x, y, a, b);
                    if owner_a[a] != owner_b[b] && v > tol {
                        return Err(Error::CrossBlockMass { x, y, a, b, value: v });
                    }
                }
            }
        }
    }

    let mass = |i: usize, x: usize, y: usize| -> f64 {
        layout.alice[i]
            .iter()
            .flat_map(|&a| layout.bob[i].iter().map(move |&b| (a, b)))
            .map(|(a, b)| p.get(x, y, a, b))
            .sum()
    };

    let mut weights = Vec::with_capacity(layout.blocks());
    let mut blocks = Vec::with_capacity(layout.blocks());
    for i in 0..layout.blocks() {
        let reference = mass(i, 0, 0);
        let mut total = 0.0;
        for x in 0..m {
            for y in 0..n {
                let w = mass(i, x, y);
                if (w - reference).abs() > tol {
                    return Err(Error::WeightVaries { block: i, x, y, weight: w, reference });
                }
                total += w;
            }
        }
        let weight = total / (m * n) as f64;
        weights.push(weight);
        if weight <= tol {
            blocks.push(None);
            continue;
        }
        let (ri, si) = (layout.alice[i].len(), layout.bob[i].len());
        let mut flat = Vec::with_capacity(m * n * ri * si);
        for x in 0..m {
            for y in 0..n {
                let w = mass(i, x, y);
                for &a in &layout.alice[i] {
                    for &b in &layout.bob[i] {
                        flat.push(p.get(x, y, a, b) / w);
                    }
                }
            }
        }
        blocks.push(Some(Correlation::new(m, n, ri, si, flat)?));
    }
    Ok(BlockStructure { weights, blocks })
}

/// `max_tv`: worst-case total variation `½ Σ_{a,b} |p − q|` over question
/// pairs. `l2`: Euclidean norm of `p − q` over all entries.
pub fn distance(p: &Correlation, q: &Correlation, metric: Metric) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", p.shape(), q.shape())));
    }
    Ok(match metric {
        Metric::L2 => p
            .table
            .iter()
            .zip(&q.table)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt(),
        Metric::MaxTv => p
            .table
            .chunks(p.r * p.s)
            .zip(q.table.chunks(q.r * q.s))
            .map(|(u, v)| 0.5 * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max),
    })
}

#[derive(Serialize, Deserialize)]
struct CorrelationJson {
    m: usize,
    n: usize,
    r: usize,
    s: usize,
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<Correlation> for CorrelationJson {
    fn from(p: Correlation) -> Self {
        let table = (0..p.m)
            .map(|x| (0..p.n).map(|y| p.table(x, y).entries).collect())
            .collect();
        CorrelationJson { m: p.m, n: p.n, r: p.r, s: p.s, table }
    }
}

impl TryFrom<CorrelationJson> for Correlation {
    type Error = Error;

    fn try_from(j: CorrelationJson) -> Result<Self> {
        let nested_ok = j.table.len() == j.m
            && j.table.iter().all(|row| {
                row.len() == j.n
                    && row.iter().all(|t| t.len() == j.r && t.iter().all(|r| r.len() == j.s))
            });
        if !nested_ok {
            return Err(Error::Shape("nested table does not match m, n, r, s".into()));
        }
        let flat = j.table.into_iter().flatten().flatten().flatten().collect();
        Correlation::new(j.m, j.n, j.r, j.s, flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(m: usize, n: usize, r: usize, s: usize) -> Correlation {
        let v = 1.0 / (r * s) as f64;
        Correlation::new(m, n, r, s, vec![v; m * n * r * s]).unwrap()
    }

    #[test]
    fn rejects_unnormalized_tables() {
        let err = Correlation::new(1, 1, 2, 2, vec![0.5, 0.5, 0.5, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Normalization { sum, .. } if (sum - 1.5).abs() < 1e-15));
    }

    #[test]
    fn clamps_tiny_negative_entries() {
        let p = Correlation::new(1, 1, 1, 2, vec![1.0 + 5e-15, -5e-15]).unwrap();
        assert_eq!(p.get(0, 0, 0, 1), 0.0);
        assert!(Correlation::new(1, 1, 1, 2, vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn single_block_direct_sum_is_identity() {
        let q = uniform(2, 3, 2, 2);
        assert_eq!(direct_sum(&[(1.0, q.clone())]).unwrap(), q);
    }

    #[test]
    fn deterministic_blocks_sum_diagonally() {
        let p = Correlation::deterministic(1, 1, 2, 2, 0, 0).unwrap();
        let sum = direct_sum(&[(0.5, p.clone()), (0.5, p)]).unwrap();
        assert_eq!(sum.answers(), (4, 4));
        assert_eq!(sum.get(0, 0, 0, 0), 0.5);
        assert_eq!(sum.get(0, 0, 2, 2), 0.5);
        let total: f64 = sum.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_sum_rejects_bad_inputs() {
        let a = uniform(2, 2, 2, 2);
        let b = uniform(1, 2, 2, 2);
        assert!(matches!(direct_sum(&[(0.5, a.clone()), (0.5, b)]), Err(Error::Shape(_))));
        assert!(matches!(
            direct_sum(&[(0.5, a.clone()), (0.4, a)]),
            Err(Error::Parameter { name: "weights", .. })
        ));
    }

    #[test]
    fn uniform_table_has_no_block_structure() {
        let p = uniform(1, 1, 2, 2);
        let layout = BlockLayout::new(vec![vec![0], vec![1]], vec![vec![0], vec![1]]);
        match block_structure_check(&p, &layout, 1e-9) {
            Err(Error::CrossBlockMass { value, .. }) => assert_eq!(value, 0.25),
            other => panic!("expected cross-block failure, got {other:?}"),
        }
    }

    #[test]
    fn varying_weight_is_reported() {
        // block masses 1/0 on (0,0) but 0/1 on (0,1)
        let table = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let p = Correlation::new(1, 2, 2, 2, table).unwrap();
        let layout = BlockLayout::new(vec![vec![0], vec![1]], vec![vec![0], vec![1]]);
        assert!(matches!(
            block_structure_check(&p, &layout, 1e-9),
            Err(Error::WeightVaries { block: 0, x: 0, y: 1, .. })
        ));
    }

    #[test]
    fn partition_validation() {
        let bad = BlockLayout::new(vec![vec![0, 1], vec![1]], vec![vec![0], vec![1]]);
        assert!(bad.validate(2, 2).is_err());
        let uncovered = BlockLayout::new(vec![vec![0]], vec![vec![0, 1]]);
        assert!(uncovered.validate(2, 2).is_err());
        assert!(BlockLayout::contiguous(&[(2, 2), (1, 1)]).validate(3, 3).is_ok());
    }

    #[test]
    fn restrict_errors_and_identity() {
        let p = uniform(2, 3, 2, 2);
        assert_eq!(p.restrict(&[0, 1], &[0, 1, 2]).unwrap(), p);
        assert!(p.restrict(&[], &[0]).is_err());
        assert!(p.restrict(&[0], &[3]).is_err());
    }

    #[test]
    fn disjoint_deterministic_tables_are_at_tv_one() {
        let p = Correlation::deterministic(1, 1, 2, 2, 0, 0).unwrap();
        let q = Correlation::deterministic(1, 1, 2, 2, 1, 1).unwrap();
        assert_eq!(distance(&p, &q, Metric::MaxTv).unwrap(), 1.0);
        assert_eq!(distance(&p, &p, Metric::MaxTv).unwrap(), 0.0);
        assert!((distance(&p, &q, Metric::L2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(distance(&p, &uniform(1, 1, 3, 2), Metric::L2).is_err());
    }

    #[test]
    fn permutation_flips_labels() {
        let p = Correlation::deterministic(1, 1, 2, 2, 0, 1).unwrap();
        let f = p.permute_answers(&[1, 0], &[1, 0]).unwrap();
        assert_eq!(f.get(0, 0, 1, 0), 1.0);
        assert!(p.permute_answers(&[0, 0], &[1, 0]).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let p = direct_sum(&[(0.25, uniform(2, 2, 2, 2)), (0.75, Correlation::deterministic(2, 2, 1, 1, 0, 0).unwrap())]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["r"], 3);
        assert_eq!(v["table"][1][0][2][2], 0.75);
        let back: Correlation = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let broken = text.replace("0.75", "0.7");
        assert!(serde_json::from_str::<Correlation>(&broken).is_err());
    }

    #[test]
    fn csv_has_header_and_one_row_per_entry() {
        let p = uniform(1, 2, 2, 2);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,a,b,value");
        assert_eq!(lines.len(), 1 + 8);
        assert_eq!(lines[5], "0,1,0,0,0.25");
    }
}
