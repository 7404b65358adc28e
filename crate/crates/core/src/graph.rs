//! Erdős–Rényi sampling at connection probability `λ/n` and the
//! `1/√λ`-scaled adjacency matrix.

use std::io::{BufRead, Write};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::rng::{stream, unit_f64};

/// `(n, λ, seed)` for one graph sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl GraphParams {
    pub fn new(n: usize, lambda: f64, seed: u64) -> Result<Self> {
        let p = Self { n, lambda, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "vertex count must be at least 1"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::param(
                "lambda",
                format!(
                    "expected degree must be finite and non-negative, got {}",
                    self.lambda
                ),
            ));
        }
        if self.lambda > self.n as f64 {
            return Err(Error::param(
                "lambda",
                format!("λ = {} exceeds n = {} (p = λ/n > 1)", self.lambda, self.n),
            ));
        }
        Ok(())
    }

    /// Connection probability `λ/n`.
    pub fn p(&self) -> f64 {
        self.lambda / self.n as f64
    }
}

/// Whether stored values are raw adjacency (`1`) or scaled by `1/√λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Raw,
    Scaled { lambda: f64 },
}

/// Upper-triangular entry `(i, j, value)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Symmetric matrix with zero diagonal, stored as its strict upper triangle
/// plus a CSR row index over both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    n: usize,
    entries: Vec<Entry>,
    scale: Scale,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Entries must satisfy `i < j < n` and be free of duplicates.
    pub fn new(n: usize, mut entries: Vec<Entry>, scale: Scale) -> Result<Self> {
        for e in &entries {
            if e.i >= e.j || e.j >= n {
                return Err(Error::Validation(format!(
                    "entry ({}, {}) is not strictly upper-triangular in dimension {n}",
                    e.i, e.j
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite value at ({}, {})",
                    e.i, e.j
                )));
            }
        }
        entries.sort_by_key(|e| (e.i, e.j));
        if entries
            .windows(2)
            .any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j))
        {
            return Err(Error::Validation("duplicate entry".into()));
        }

        let mut degree = vec![0usize; n];
        for e in &entries {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut fill = row_offsets[..n].to_vec();
        let mut cols = vec![0usize; 2 * entries.len()];
        let mut vals = vec![0.0; 2 * entries.len()];
        for e in &entries {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                cols[fill[a]] = b;
                vals[fill[a]] = e.value;
                fill[a] += 1;
            }
        }
        for r in 0..n {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            let mut row: Vec<(usize, f64)> = cols[lo..hi]
                .iter()
                .copied()
                .zip(vals[lo..hi].iter().copied())
                .collect();
            row.sort_by_key(|&(c, _)| c);
            for (k, (c, v)) in row.into_iter().enumerate() {
                cols[lo + k] = c;
                vals[lo + k] = v;
            }
        }
        Ok(Self {
            n,
            entries,
            scale,
            row_offsets,
            cols,
            vals,
        })
    }

    /// Adjacency matrix of an edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let entries = edges
            .iter()
            .map(|&(a, b)| Entry {
                i: a.min(b),
                j: a.max(b),
                value: 1.0,
            })
            .collect();
        Self::new(n, entries, Scale::Raw)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn edge_count(&self) -> usize {
        self.entries.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().map(|e| (e.i, e.j))
    }

    /// `(column, value)` pairs of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(self.n);
        for e in &self.entries {
            m.set(e.i, e.j, e.value);
        }
        m
    }

    /// Dense principal submatrix on `vertices`.
    pub fn dense_principal(&self, vertices: &[usize]) -> SymmetricMatrix {
        let mut local = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k;
        }
        let mut m = SymmetricMatrix::zeros(vertices.len());
        for (a, &v) in vertices.iter().enumerate() {
            for (c, val) in self.row(v) {
                let b = local[c];
                if b != usize::MAX && a < b {
                    m.set(a, b, val);
                }
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `Tr(S^k)` by local sparse powers: `Σ_i ‖S^m e_i‖²` for `k = 2m` and
    /// `Σ_i ⟨S^m e_i, S^{m+1} e_i⟩` for `k = 2m + 1`.
    ///
    /// Work per vertex is proportional to the size of its radius-⌈k/2⌉
    /// neighbourhood, so this is cheap for sparse graphs and small `k`.
    pub fn trace_power(&self, k: u32) -> f64 {
        if k == 0 {
            return self.n as f64;
        }
        let m = k / 2;
        let mut cur = vec![0.0; self.n];
        let mut next = vec![0.0; self.n];
        let mut cur_support: Vec<usize> = Vec::new();
        let mut next_support: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.n];
        let mut total = 0.0;
        for i in 0..self.n {
            cur_support.clear();
            cur_support.push(i);
            cur[i] = 1.0;
            for _ in 0..m {
                self.sparse_step(&cur, &cur_support, &mut next, &mut next_support, &mut mark);
                for &s in &cur_support {
                    cur[s] = 0.0;
                }
                std::mem::swap(&mut cur, &mut next);
                std::mem::swap(&mut cur_support, &mut next_support);
            }
            // cur = S^m e_i
            if k % 2 == 0 {
                total += cur_support.iter().map(|&s| cur[s] * cur[s]).sum::<f64>();
            } else {
                self.sparse_step(&cur, &cur_support, &mut next, &mut next_support, &mut mark);
                total += cur_support.iter().map(|&s| cur[s] * next[s]).sum::<f64>();
                for &s in &next_support {
                    next[s] = 0.0;
                }
            }
            for &s in &cur_support {
                cur[s] = 0.0;
            }
        }
        total
    }

    fn sparse_step(
        &self,
        x: &[f64],
        support: &[usize],
        y: &mut [f64],
        y_support: &mut Vec<usize>,
        mark: &mut [bool],
    ) {
        y_support.clear();
        for &s in support {
            let xs = x[s];
            for (j, v) in self.row(s) {
                if !mark[j] {
                    mark[j] = true;
                    y_support.push(j);
                }
                y[j] += v * xs;
            }
        }
        for &j in y_support.iter() {
            mark[j] = false;
        }
    }

    /// Connected components, each sorted ascending, ordered by smallest vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for (u, _) in self.row(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// Index of the unordered pair `{i, j}`, `i < j < n`, in row-major order of
/// the strict upper triangle.
#[inline]
fn pair_index(n: usize, i: usize, j: usize) -> u128 {
    let (n, i, j) = (n as u128, i as u128, j as u128);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Sample the adjacency matrix of `G(n, λ/n)`.
///
/// Each unordered pair `{i, j}` owns one 64-bit word of a ChaCha8 keystream
/// keyed by the seed, addressed by its pair index; the edge is present when
/// that word, read as a uniform double, falls below `λ/n`. The result is a
/// pure function of `(n, λ, seed)` regardless of iteration order.
pub fn sample_er_graph(params: &GraphParams) -> Result<SparseSymmetricMatrix> {
    params.validate()?;
    let n = params.n;
    let p = params.p();
    let mut rng = stream(params.seed);
    let mut entries =
        Vec::with_capacity((p * (n * n.saturating_sub(1)) as f64 / 2.0 * 1.1) as usize + 8);
    if p > 0.0 {
        for i in 0..n.saturating_sub(1) {
            // Two 32-bit words per pair.
            rng.set_word_pos(2 * pair_index(n, i, i + 1));
            for j in i + 1..n {
                if unit_f64(rng.next_u64()) < p {
                    entries.push(Entry { i, j, value: 1.0 });
                }
            }
        }
    }
    SparseSymmetricMatrix::new(n, entries, Scale::Raw)
}

/// `A = M/√λ`.
pub fn scale_adjacency(m: &SparseSymmetricMatrix, lambda: f64) -> Result<SparseSymmetricMatrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("scale requires λ > 0, got {lambda}"),
        ));
    }
    if m.scale != Scale::Raw {
        return Err(Error::param("m", "matrix is already scaled"));
    }
    let factor = 1.0 / lambda.sqrt();
    let mut out = m.clone();
    for e in &mut out.entries {
        e.value *= factor;
    }
    for v in &mut out.vals {
        *v *= factor;
    }
    out.scale = Scale::Scaled { lambda };
    Ok(out)
}

pub fn isolated_vertex_count(m: &SparseSymmetricMatrix) -> usize {
    (0..m.n()).filter(|&i| m.degree(i) == 0).count()
}

/// Write `"n lambda seed"` then one `"i j"` line per edge (0-based, `i < j`).
pub fn write_edge_list<W: Write>(
    mut out: W,
    params: &GraphParams,
    m: &SparseSymmetricMatrix,
) -> Result<()> {
    if m.n() != params.n {
        return Err(Error::param(
            "params",
            "dimension does not match the matrix",
        ));
    }
    writeln!(out, "{} {} {}", params.n, params.lambda, params.seed)?;
    for (i, j) in m.edges() {
        writeln!(out, "{i} {j}")?;
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_edge_list`]; returns a raw adjacency matrix.
pub fn read_edge_list<R: BufRead>(input: R) -> Result<(GraphParams, SparseSymmetricMatrix)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty edge list".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse(format!("bad header `{header}`")));
    }
    let bad = |what: &str| Error::Parse(format!("bad {what} in header `{header}`"));
    let params = GraphParams {
        n: fields[0].parse().map_err(|_| bad("n"))?,
        lambda: fields[1].parse().map_err(|_| bad("lambda"))?,
        seed: fields[2].parse().map_err(|_| bad("seed"))?,
    };
    params.validate()?;
    let mut edges = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) if i < j => edges.push((i, j)),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected `i j` with i < j, got `{line}`",
                    lineno + 2
                )))
            }
        }
    }
    let m = SparseSymmetricMatrix::from_edges(params.n, &edges)?;
    Ok((params, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_gives_empty_graph() {
        let m = sample_er_graph(&GraphParams::new(5, 0.0, 7).unwrap()).unwrap();
        assert_eq!(m.n(), 5);
        assert_eq!(m.edge_count(), 0);
        assert_eq!(isolated_vertex_count(&m), 5);
        assert_eq!(m.to_dense(), SymmetricMatrix::zeros(5));
    }

    #[test]
    fn single_vertex_has_no_loop() {
        let m = sample_er_graph(&GraphParams::new(1, 0.5, 1).unwrap()).unwrap();
        assert_eq!(m.to_dense().get(0, 0), 0.0);
        assert_eq!(m.edge_count(), 0);
    }

    #[test]
    fn complete_graph_at_lambda_equal_n() {
        let m = sample_er_graph(&GraphParams::new(6, 6.0, 3).unwrap()).unwrap();
        assert_eq!(m.edge_count(), 15);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            GraphParams::new(0, 0.0, 1),
            Err(Error::Parameter { name: "n", .. })
        ));
        assert!(matches!(
            GraphParams::new(4, 5.0, 1),
            Err(Error::Parameter { name: "lambda", .. })
        ));
        assert!(GraphParams::new(4, -1.0, 1).is_err());
        let bad = GraphParams {
            n: 3,
            lambda: 4.0,
            seed: 0,
        };
        assert!(sample_er_graph(&bad).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let p = GraphParams::new(300, 5.0, 99).unwrap();
        let a = sample_er_graph(&p).unwrap();
        let b = sample_er_graph(&p).unwrap();
        assert_eq!(a.entries(), b.entries());
        let c = sample_er_graph(&GraphParams { seed: 100, ..p }).unwrap();
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn scale_factor() {
        let m = SparseSymmetricMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let one = scale_adjacency(&m, 1.0).unwrap();
        assert_eq!(one.entries(), m.entries());
        let a = scale_adjacency(&m, 4.0).unwrap();
        assert!(a.entries().iter().all(|e| e.value == 0.5));
        assert_eq!(a.scale(), Scale::Scaled { lambda: 4.0 });
        assert!(scale_adjacency(&m, 0.0).is_err());
        assert!(scale_adjacency(&m, -2.0).is_err());
        assert!(scale_adjacency(&a, 4.0).is_err());
    }

    #[test]
    fn path_has_no_isolated_vertices() {
        let m = SparseSymmetricMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(isolated_vertex_count(&m), 0);
        assert_eq!(m.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn trace_power_matches_dense_powers() {
        let p = GraphParams::new(60, 4.0, 5).unwrap();
        let a = scale_adjacency(&sample_er_graph(&p).unwrap(), 4.0).unwrap();
        let d = a.to_dense();
        let mut power = SymmetricMatrix::identity(60);
        for k in 1..=6u32 {
            // power <- power * d (dense, products of commuting symmetric matrices)
            let mut next = SymmetricMatrix::zeros(60);
            for i in 0..60 {
                for j in i..60 {
                    let v: f64 = (0..60).map(|t| power.get(i, t) * d.get(t, j)).sum();
                    next.set(i, j, v);
                }
            }
            power = next;
            let dense = power.trace();
            let sparse = a.trace_power(k);
            assert!(
                (dense - sparse).abs() <= 1e-10 * dense.abs().max(1.0),
                "k={k}: {dense} vs {sparse}"
            );
        }
        assert_eq!(a.trace_power(0), 60.0);
    }

    #[test]
    fn trace_of_square_counts_edges() {
        let lambda = 3.0;
        let m = sample_er_graph(&GraphParams::new(200, lambda, 11).unwrap()).unwrap();
        let a = scale_adjacency(&m, lambda).unwrap();
        let expect = 2.0 * m.edge_count() as f64 / lambda;
        assert!((a.trace_power(2) - expect).abs() < 1e-9);
    }

    #[test]
    fn components_of_a_forest() {
        let m = SparseSymmetricMatrix::from_edges(6, &[(0, 2), (2, 4), (1, 5)]).unwrap();
        assert_eq!(
            m.connected_components(),
            vec![vec![0, 2, 4], vec![1, 5], vec![3]]
        );
        let sub = m.dense_principal(&[0, 2, 4]);
        assert_eq!(sub.get(0, 1), 1.0);
        assert_eq!(sub.get(0, 2), 0.0);
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(SparseSymmetricMatrix::from_edges(3, &[(1, 1)]).is_err());
        assert!(SparseSymmetricMatrix::from_edges(3, &[(0, 3)]).is_err());
        assert!(SparseSymmetricMatrix::from_edges(3, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let p = GraphParams::new(50, 3.5, 42).unwrap();
        let m = sample_er_graph(&p).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &p, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("50 3.5 42\n"));
        let (q, back) = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(q, p);
        assert_eq!(back, m);
    }

    #[test]
    fn edge_list_parse_errors() {
        assert!(read_edge_list("".as_bytes()).is_err());
        assert!(read_edge_list("3 1\n".as_bytes()).is_err());
        assert!(read_edge_list("3 1 0\n2 1\n".as_bytes()).is_err());
        assert!(read_edge_list("3 1 0\n0 x\n".as_bytes()).is_err());
    }
}
