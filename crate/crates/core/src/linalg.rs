//! Dense symmetric matrices and their eigendecomposition.
//!
//! The reference solver is Householder tridiagonalization followed by the
//! implicit-shift QL iteration, with the orthogonal transforms accumulated
//! into the eigenvector basis (the classic `tred2`/`tql2` pair). It is
//! O(n³) and comfortable up to a few hundred rows. For the n ≈ 2000–4000
//! matrices of the experiments, [`EigenBackend::Faer`] routes the same
//! request through the SIMD solver of the `faer` crate.

// Index loops mirror the textbook formulation of the reductions.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Dense real symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        m
    }

    /// Build from the upper triangle: `f(i, j)` is called for `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Build from explicit rows, rejecting non-square or non-symmetric input.
    ///
    /// Symmetry is checked to a relative tolerance of 1e-12 of the largest
    /// entry; the stored matrix is the exact average of `R` and `Rᵀ`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Validation("matrix is not square".into()));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(Error::Validation(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Validation(format!(
                        "not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                m.data[i * n + j] = 0.5 * (a + b);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Add `v` to `(i, j)` and, off the diagonal, to `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `y = S x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// Principal submatrix keeping `indices` (in the given order).
    pub fn principal(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        let mut m = Self::zeros(k);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                m.data[a * k + b] = self.get(i, j);
            }
        }
        m
    }

    /// Delete row and column `skip`.
    pub fn minor(&self, skip: usize) -> Self {
        assert!(skip < self.n);
        let keep: Vec<usize> = (0..self.n).filter(|&i| i != skip).collect();
        self.principal(&keep)
    }

    /// Row `coord` with its diagonal entry removed, i.e. the `X` vector of
    /// the block form `[[a, Xᵀ], [X, minor]]` after moving `coord` first.
    pub fn off_diagonal_column(&self, coord: usize) -> Vec<f64> {
        (0..self.n)
            .filter(|&j| j != coord)
            .map(|j| self.get(coord, j))
            .collect()
    }

    /// Entrywise `self + scale * other`.
    pub fn add_scaled(&self, other: &Self, scale: f64) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + scale * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let tol = rel_tol * self.max_abs().max(1.0);
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ascending eigenvalues with an orthonormal basis of eigenvectors.
///
/// Vector `i` pairs with eigenvalue `i` and is stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    n: usize,
    eigenvalues: Vec<f64>,
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    /// Assemble from `(eigenvalue, vector)` pairs in any order; the pairs
    /// are sorted ascending, ties kept in input order.
    pub fn from_pairs(n: usize, mut pairs: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if pairs.len() != n || pairs.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::Validation(format!(
                "expected {n} eigenpairs of length {n}"
            )));
        }
        if pairs.iter().any(|(l, _)| !l.is_finite()) {
            return Err(Error::Numerical("non-finite eigenvalue".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut eigenvalues = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * n);
        for (l, v) in pairs {
            eigenvalues.push(l);
            vectors.extend_from_slice(&v);
        }
        Ok(Self {
            n,
            eigenvalues,
            vectors,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.n.max(1)).take(self.n)
    }

    /// `max_{i,j} |⟨u_i, u_j⟩ − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.vector(i), self.vector(j)) - target).abs());
            }
        }
        worst
    }

    /// `max_i ‖S u_i − Λ_i u_i‖₂`.
    pub fn residual(&self, s: &SymmetricMatrix) -> f64 {
        (0..self.n)
            .map(|i| {
                let u = self.vector(i);
                let su = s.matvec(u);
                su.iter()
                    .zip(u)
                    .map(|(a, b)| (a - self.eigenvalues[i] * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Spectral norm, read off the extreme eigenvalues.
    pub fn operator_norm(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(a), Some(b)) => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    /// Check the stated decomposition bounds against the source matrix:
    /// orthonormality within 1e-8 and residual within 1e-8·(1 + ‖S‖).
    pub fn satisfies_invariants(&self, s: &SymmetricMatrix) -> bool {
        let ascending = self.eigenvalues.windows(2).all(|w| w[0] <= w[1]);
        ascending
            && self.orthonormality_error() <= 1e-8
            && self.residual(s) <= 1e-8 * (1.0 + self.operator_norm())
    }
}

/// Which dense solver backs a decomposition request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenBackend {
    /// Householder tridiagonalization + implicit QL, implemented here.
    #[default]
    HouseholderQl,
    /// The blocked self-adjoint solver of `faer`.
    Faer,
    /// `HouseholderQl` up to [`AUTO_THRESHOLD`] rows, `Faer` above.
    Auto,
}

/// Size at which [`EigenBackend::Auto`] switches to `faer`.
pub const AUTO_THRESHOLD: usize = 256;

impl EigenBackend {
    fn resolve(self, n: usize) -> Self {
        match self {
            EigenBackend::Auto if n <= AUTO_THRESHOLD => EigenBackend::HouseholderQl,
            EigenBackend::Auto => EigenBackend::Faer,
            other => other,
        }
    }
}

const QL_MAX_ITER: usize = 60;

/// Full eigendecomposition with the Householder/QL solver.
pub fn eigen_decompose(s: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    eigen_decompose_with(s, EigenBackend::HouseholderQl)
}

pub fn eigen_decompose_with(
    s: &SymmetricMatrix,
    backend: EigenBackend,
) -> Result<SpectralDecomposition> {
    check_input(s)?;
    let n = s.n();
    let pairs = match backend.resolve(n) {
        EigenBackend::Faer => faer_eigen(s)?,
        _ => {
            let (d, v) = tridiagonal_ql(s, true)?;
            let v = v.expect("vectors requested");
            // v is row-major with eigenvectors in columns.
            d.into_iter()
                .enumerate()
                .map(|(c, l)| (l, (0..n).map(|r| v[r * n + c]).collect()))
                .collect()
        }
    };
    SpectralDecomposition::from_pairs(n, pairs)
}

/// Ascending eigenvalues only.
pub fn eigenvalues(s: &SymmetricMatrix, backend: EigenBackend) -> Result<Vec<f64>> {
    check_input(s)?;
    let mut vals = match backend.resolve(s.n()) {
        EigenBackend::Faer => {
            if s.n() == 0 {
                return Ok(Vec::new());
            }
            let m = to_faer(s);
            m.self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::Numerical(format!("faer eigenvalues: {e:?}")))?
        }
        _ => tridiagonal_ql(s, false)?.0,
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn check_input(s: &SymmetricMatrix) -> Result<()> {
    if s.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    if !s.is_symmetric(1e-12) {
        return Err(Error::Validation("matrix is not symmetric".into()));
    }
    Ok(())
}

fn to_faer(s: &SymmetricMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(s.n(), s.n(), |i, j| s.get(i, j))
}

fn faer_eigen(s: &SymmetricMatrix) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = s.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let evd = to_faer(s)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("faer eigendecomposition: {e:?}")))?;
    let vals = evd.S().column_vector();
    let u = evd.U();
    Ok((0..n)
        .map(|c| (vals[c], (0..n).map(|r| u[(r, c)]).collect()))
        .collect())
}

/// Householder reduction to tridiagonal form followed by implicit QL.
///
/// Returns the (unsorted) eigenvalues and, when requested, the row-major
/// matrix whose columns are the eigenvectors.
fn tridiagonal_ql(s: &SymmetricMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = s.n();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    let mut v = s.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e, want_vectors)?;
    Ok((d, want_vectors.then_some(v)))
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0 guarantees m < n.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::Numerical(format!(
                        "QL iteration did not converge for eigenvalue {l} after {QL_MAX_ITER} sweeps"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let h = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                            v[at(k, i)] = c * v[at(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
