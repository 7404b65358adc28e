//! Closed-walk combinatorics behind the moments of the limiting spectral
//! distribution.
//!
//! A k-tuple `(i_1, …, i_k)` encodes the closed walk `i_1 i_2 ⋯ i_k i_1`.
//! It is *admissible* when consecutive entries differ cyclically, and
//! *normalized* when additionally `i_1 = 1` and every value `v > 1` is
//! preceded somewhere by `v − 1`. Normalized tuples are the canonical
//! representatives of walks up to vertex relabelling, so summing over them
//! with the number of injective relabellings recovers `E Tr M^k`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default enumeration cap on the walk length.
pub const DEFAULT_WALK_CAP: usize = 14;

/// Hard limit: walk vertices are tracked in a 120-bit edge mask.
pub const MAX_WALK_LENGTH: usize = 16;

/// A normalized, admissible tuple with 1-based entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedTuple {
    entries: Vec<u8>,
}

impl NormalizedTuple {
    /// Validates admissibility and normalization.
    pub fn new(entries: Vec<u8>) -> Result<Self> {
        if !is_admissible(&entries) || !is_normalized(&entries) {
            return Err(Error::Validation(format!(
                "{entries:?} is not a normalized admissible tuple"
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct undirected edges of the closed walk, as `(min, max)`.
    pub fn edges(&self) -> Vec<(u8, u8)> {
        let k = self.entries.len();
        let mut edges: Vec<(u8, u8)> = (0..k)
            .map(|t| {
                let (a, b) = (self.entries[t], self.entries[(t + 1) % k]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn vertex_count(&self) -> usize {
        self.entries.iter().copied().max().unwrap_or(0) as usize
    }

    /// The walk graph is a tree iff `|V| = |E| + 1`; walks are connected.
    pub fn is_tree(&self) -> bool {
        self.vertex_count() == self.edge_count() + 1
    }
}

/// Consecutive entries differ, including the wrap-around pair.
pub fn is_admissible(entries: &[u8]) -> bool {
    let k = entries.len();
    k > 0 && (0..k).all(|t| entries[t] != entries[(t + 1) % k])
}

/// `i_1 = 1` and each value `v > 1` has `v − 1` at an earlier position.
pub fn is_normalized(entries: &[u8]) -> bool {
    if entries.first() != Some(&1) {
        return false;
    }
    entries
        .iter()
        .enumerate()
        .all(|(j, &v)| v == 1 || entries[..j].contains(&(v - 1)))
}

#[inline]
fn edge_bit(a: u8, b: u8) -> u128 {
    // Triangular index of the pair, 0-based vertices, a != b.
    let (lo, hi) = if a < b {
        (a - 1, b - 1)
    } else {
        (b - 1, a - 1)
    };
    let idx = hi as u32 * (hi as u32 - 1) / 2 + lo as u32;
    1u128 << idx
}

fn check_length(k: usize, cap: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k", "walk length must be at least 1"));
    }
    if cap > MAX_WALK_LENGTH {
        return Err(Error::Unsupported(format!(
            "enumeration cap {cap} exceeds the supported maximum {MAX_WALK_LENGTH}"
        )));
    }
    if k > cap {
        return Err(Error::Unsupported(format!(
            "walk length {k} exceeds the enumeration cap {cap}"
        )));
    }
    Ok(())
}

/// Visit every normalized k-tuple together with `(|E|, |V|)` of its walk.
///
/// Depth-first: the next entry is an already-used value other than the
/// current one, or the fresh value `max + 1`, so normalization holds by
/// construction and nothing is generated only to be filtered out.
pub fn for_each_normalized_tuple<F>(k: usize, cap: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[u8], usize, usize),
{
    check_length(k, cap)?;
    let mut tuple = vec![0u8; k];
    tuple[0] = 1;
    if k >= 2 {
        descend(&mut tuple, 1, 1, 0, &mut visit);
    }
    Ok(())
}

fn descend<F>(tuple: &mut [u8], pos: usize, max: u8, mask: u128, visit: &mut F)
where
    F: FnMut(&[u8], usize, usize),
{
    let k = tuple.len();
    let prev = tuple[pos - 1];
    for v in 1..=max + 1 {
        if v == prev {
            continue;
        }
        let last = pos == k - 1;
        if last && v == 1 {
            continue;
        }
        tuple[pos] = v;
        let mask = mask | edge_bit(prev, v);
        let new_max = max.max(v);
        if last {
            let closed = mask | edge_bit(v, 1);
            visit(tuple, closed.count_ones() as usize, new_max as usize);
        } else {
            descend(tuple, pos + 1, new_max, mask, visit);
        }
    }
}

/// All normalized k-tuples under the default cap, in lexicographic order.
pub fn enumerate_normalized_tuples(k: usize) -> Result<Vec<NormalizedTuple>> {
    enumerate_normalized_tuples_capped(k, DEFAULT_WALK_CAP)
}

pub fn enumerate_normalized_tuples_capped(k: usize, cap: usize) -> Result<Vec<NormalizedTuple>> {
    let mut out = Vec::new();
    for_each_normalized_tuple(k, cap, |t, _, _| {
        out.push(NormalizedTuple {
            entries: t.to_vec(),
        })
    })?;
    Ok(out)
}

/// Tree-walk coefficients `a_l` and the `(|E|, |V|)` census of the
/// normalized k-tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCoefficientTable {
    k: usize,
    /// `coefficients[l]` for `0 <= l <= k/2`; index 0 is always zero.
    coefficients: Vec<u64>,
    class_counts: BTreeMap<(usize, usize), u64>,
}

impl WalkCoefficientTable {
    pub fn build(k: usize) -> Result<Self> {
        Self::build_capped(k, DEFAULT_WALK_CAP)
    }

    pub fn build_capped(k: usize, cap: usize) -> Result<Self> {
        // counts[e][v]
        let mut counts = vec![vec![0u64; k + 1]; k + 1];
        for_each_normalized_tuple(k, cap, |_, e, v| counts[e][v] += 1)?;
        let mut class_counts = BTreeMap::new();
        let mut coefficients = vec![0u64; k / 2 + 1];
        for (e, row) in counts.iter().enumerate() {
            for (v, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                class_counts.insert((e, v), c);
                if v == e + 1 {
                    // Closed walks on a tree cross each edge an even number of times.
                    debug_assert!(2 * e <= k);
                    coefficients[e] += c;
                }
            }
        }
        Ok(Self {
            k,
            coefficients,
            class_counts,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `a_l`; zero outside `1..=k/2`.
    pub fn a(&self, l: usize) -> u64 {
        self.coefficients.get(l).copied().unwrap_or(0)
    }

    /// `(l, a_l)` for `1 <= l <= ⌊k/2⌋`.
    pub fn coefficients(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.coefficients.iter().copied().enumerate().skip(1)
    }

    /// Number of normalized tuples per `(|E|, |V|)`.
    pub fn class_counts(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.class_counts
    }

    pub fn tuple_count(&self) -> u64 {
        self.class_counts.values().sum()
    }

    /// `⟨ν_λ, x^k⟩ = λ^{−k/2} Σ_l a_l λ^l`.
    pub fn limiting_moment(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let half = self.k as f64 / 2.0;
        Ok(self
            .coefficients()
            .map(|(l, a)| a as f64 * lambda.powf(l as f64 - half))
            .sum())
    }

    /// Exact `E⟨ν_{n,λ}, x^k⟩` at finite `n`:
    /// `(n λ^{k/2})^{-1} Σ_ω (λ/n)^{|E(ω)|} n(n−1)⋯(n−|V(ω)|+1)`.
    ///
    /// Each class term is evaluated as `c λ^{e−k/2} n^{v−e−1} Π_{j<v}(1 − j/n)`,
    /// which stays in range for large `n` because `v ≤ e + 1`.
    pub fn expected_moment(&self, n: usize, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if n == 0 {
            return Err(Error::param("n", "dimension must be at least 1"));
        }
        let nf = n as f64;
        let half = self.k as f64 / 2.0;
        let mut total = 0.0;
        for (&(e, v), &c) in &self.class_counts {
            if v > n {
                continue;
            }
            let falling: f64 = (0..v).map(|j| 1.0 - j as f64 / nf).product();
            let n_power = nf.powi(v as i32 - e as i32 - 1);
            total += c as f64 * lambda.powf(e as f64 - half) * n_power * falling;
        }
        Ok(total)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    Ok(())
}

pub fn tree_walk_coefficients(k: usize) -> Result<WalkCoefficientTable> {
    WalkCoefficientTable::build(k)
}

/// `⟨ν_λ, x^k⟩`; zero for odd `k`.
pub fn limiting_moment(k: usize, lambda: f64) -> Result<f64> {
    WalkCoefficientTable::build(k)?.limiting_moment(lambda)
}

/// Catalan number `C_m`, exact.
pub fn catalan(m: u32) -> Result<u128> {
    // C_{j+1} = C_j · 2(2j+1)/(j+2); the division is exact.
    let mut c: u128 = 1;
    for j in 0..m as u128 {
        c = c
            .checked_mul(2 * (2 * j + 1))
            .ok_or_else(|| Error::Unsupported(format!("C_{m} overflows 128 bits")))?
            / (j + 2);
    }
    Ok(c)
}

/// `∫ x^k ρ_sc(dx)`: `C_{k/2}` for even `k`, zero for odd.
pub fn semicircle_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let m = k / 2;
    match catalan(m) {
        Ok(c) => c as f64,
        // Past 128 bits: the product formula in floating point.
        Err(_) => (2..=m).map(|j| (m + j) as f64 / j as f64).product(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal definition over all `k^k` tuples with entries in `1..=k`.
    fn brute_force(k: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let total = (k as u64).pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let t: Vec<u8> = (0..k)
                .map(|_| {
                    let d = (c % k as u64) as u8 + 1;
                    c /= k as u64;
                    d
                })
                .collect();
            if is_admissible(&t) && is_normalized(&t) {
                out.push(t);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn length_one_is_empty() {
        assert!(enumerate_normalized_tuples(1).unwrap().is_empty());
    }

    #[test]
    fn lengths_two_and_three() {
        let two: Vec<_> = enumerate_normalized_tuples(2).unwrap();
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].entries(), &[1, 2]);
        let three = enumerate_normalized_tuples(3).unwrap();
        assert_eq!(three.len(), 1);
        assert_eq!(three[0].entries(), &[1, 2, 3]);
    }

    #[test]
    fn matches_brute_force_enumeration() {
        for k in 1..=8 {
            let fast: Vec<Vec<u8>> = enumerate_normalized_tuples(k)
                .unwrap()
                .into_iter()
                .map(|t| t.entries().to_vec())
                .collect();
            assert_eq!(fast, brute_force(k), "k={k}");
        }
    }

    #[test]
    fn visitor_classes_agree_with_tuple_methods() {
        for k in 2..=9 {
            for_each_normalized_tuple(k, DEFAULT_WALK_CAP, |t, e, v| {
                let nt = NormalizedTuple::new(t.to_vec()).unwrap();
                assert_eq!(nt.edge_count(), e);
                assert_eq!(nt.vertex_count(), v);
                assert!(e + 1 >= v);
            })
            .unwrap();
        }
    }

    #[test]
    fn tree_coefficients_small_k() {
        let t2 = tree_walk_coefficients(2).unwrap();
        assert_eq!(t2.a(1), 1);
        let t4 = tree_walk_coefficients(4).unwrap();
        assert_eq!((t4.a(1), t4.a(2)), (1, 2));
        let t5 = tree_walk_coefficients(5).unwrap();
        assert!(t5.coefficients().all(|(_, a)| a == 0));
    }

    #[test]
    fn odd_lengths_have_no_tree_walks() {
        for k in (1..=11).step_by(2) {
            let t = tree_walk_coefficients(k).unwrap();
            assert!(t.coefficients().all(|(_, a)| a == 0), "k={k}");
        }
    }

    #[test]
    fn top_coefficient_is_catalan() {
        for m in 1..=5u32 {
            let t = tree_walk_coefficients(2 * m as usize).unwrap();
            assert_eq!(t.a(m as usize) as u128, catalan(m).unwrap());
        }
    }

    #[test]
    fn limiting_moments() {
        for lambda in [0.5, 1.0, 7.0] {
            assert!((limiting_moment(2, lambda).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(limiting_moment(7, 3.0).unwrap(), 0.0);
        assert!((limiting_moment(4, 2.0).unwrap() - 2.5).abs() < 1e-15);
        assert!(limiting_moment(4, 0.0).is_err());
    }

    #[test]
    fn catalan_values() {
        assert_eq!(catalan(0).unwrap(), 1);
        assert_eq!(catalan(3).unwrap(), 5);
        // Oracle: the convolution recurrence.
        let mut c = vec![1u128];
        for m in 0..30usize {
            let next: u128 = (0..=m).map(|i| c[i] * c[m - i]).sum();
            c.push(next);
        }
        for (m, &v) in c.iter().enumerate() {
            assert_eq!(catalan(m as u32).unwrap(), v, "m={m}");
        }
        assert_eq!(catalan(10).unwrap(), 16796);
        assert!(matches!(catalan(200), Err(Error::Unsupported(_))));
    }

    #[test]
    fn semicircle_moments() {
        assert_eq!(semicircle_moment(6), 5.0);
        assert_eq!(semicircle_moment(5), 0.0);
        assert_eq!(semicircle_moment(0), 1.0);
        let big = semicircle_moment(300);
        assert!(big.is_finite() && big > 1e80);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_normalized_tuples(15),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            enumerate_normalized_tuples_capped(17, 17),
            Err(Error::Unsupported(_))
        ));
        assert!(enumerate_normalized_tuples(0).is_err());
    }

    #[test]
    fn tuple_validation() {
        assert!(NormalizedTuple::new(vec![1, 2, 1]).is_err());
        assert!(NormalizedTuple::new(vec![1, 3, 2]).is_err());
        assert!(NormalizedTuple::new(vec![2, 1]).is_err());
        let t = NormalizedTuple::new(vec![1, 2, 1, 3]).unwrap();
        assert_eq!(t.edges(), vec![(1, 2), (1, 3)]);
        assert!(t.is_tree());
    }
}
