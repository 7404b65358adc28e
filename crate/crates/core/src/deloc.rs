//! Eigenvector delocalization: Gaussian perturbation, infinity norms, the
//! bin partition of `[−2, 2]`, the coordinate identity for eigenvector
//! entries, interlacing and Weyl checks, and a projection concentration
//! probe.
//!
//! Indices are 0-based throughout.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::SparseSymmetricMatrix;
use crate::linalg::{self, dot, EigenBackend, SpectralDecomposition, SymmetricMatrix};
use crate::rng::{stream, BoxMuller};
use crate::spectrum::SemicircleLaw;

/// Default decay exponent of `δ(n) = n^{−γ}`.
pub const DEFAULT_GAMMA: f64 = 0.75;

/// Largest partition [`choose_partition`] will build.
pub const PARTITION_CAP: usize = 1 << 24;

/// Slack for interlacing and for eigenvalue collisions.
pub const SPECTRAL_SLACK: f64 = 1e-10;

/// `n^{−γ}`; requires `γ > 1/2` so that `δ(n)√n → 0`.
pub fn delta_schedule(n: usize, gamma: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(gamma > 0.5) || !gamma.is_finite() {
        return Err(Error::param(
            "gamma",
            format!("need gamma > 1/2 for δ(n) = o(n^-1/2), got {gamma}"),
        ));
    }
    Ok((n as f64).powf(-gamma))
}

/// Size and randomness of the perturbation `B = A + δN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub seed: u64,
    pub gamma: f64,
}

impl PerturbationSpec {
    /// `δ = n^{−γ}`.
    pub fn for_size(n: usize, gamma: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            delta: delta_schedule(n, gamma)?,
            seed,
            gamma,
        })
    }

    /// Explicit `δ`; `γ` is recorded but not used to derive it.
    pub fn with_delta(delta: f64, gamma: f64, seed: u64) -> Result<Self> {
        let spec = Self { delta, seed, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param(
                "delta",
                format!("must be finite and ≥ 0, got {}", self.delta),
            ));
        }
        if !(self.gamma > 0.5) {
            return Err(Error::param(
                "gamma",
                format!("must exceed 1/2, got {}", self.gamma),
            ));
        }
        Ok(())
    }
}

/// Symmetric matrix with independent standard normal entries on and above
/// the diagonal, filled row by row from the stream keyed by `seed`.
pub fn gaussian_matrix(n: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = stream(seed);
    let mut normal = BoxMuller::new();
    SymmetricMatrix::from_upper_fn(n, |_, _| normal.sample(&mut rng))
}

/// `A + δN` with `N = gaussian_matrix(n, spec.seed)`.
pub fn perturb(a: &SymmetricMatrix, spec: &PerturbationSpec) -> SymmetricMatrix {
    if spec.delta == 0.0 {
        return a.clone();
    }
    a.add_scaled(&gaussian_matrix(a.n(), spec.seed), spec.delta)
}

/// `‖u_i‖_∞` for every eigenvector, in eigenvalue order.
pub fn infinity_norms(d: &SpectralDecomposition) -> Vec<f64> {
    d.vectors()
        .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect()
}

/// `|{i : norm_i < ε}| / len`.
pub fn delocalized_fraction(norms: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    if norms.is_empty() {
        return Err(Error::param("norms", "empty"));
    }
    Ok(norms.iter().filter(|&&x| x < epsilon).count() as f64 / norms.len() as f64)
}

/// Fraction of eigenvalues in `[−2, 2]`.
pub fn bulk_fraction(d: &SpectralDecomposition) -> f64 {
    bulk_fraction_of(d.eigenvalues())
}

pub fn bulk_fraction_of(eigenvalues: &[f64]) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    let inside = eigenvalues
        .iter()
        .filter(|x| (-2.0..=2.0).contains(*x))
        .count();
    inside as f64 / eigenvalues.len() as f64
}

/// `Q` equal bins of width `l = 4/Q` covering `[−2, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinPartition {
    q: usize,
}

impl BinPartition {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::param("q", "need at least one bin"));
        }
        Ok(Self { q })
    }

    pub fn bins(&self) -> usize {
        self.q
    }

    pub fn width(&self) -> f64 {
        4.0 / self.q as f64
    }

    /// Lower end of bin `b` (`b = q` gives the right end, exactly 2).
    pub fn breakpoint(&self, b: usize) -> f64 {
        if b >= self.q {
            2.0
        } else {
            -2.0 + b as f64 * self.width()
        }
    }

    /// `a_1 < … < a_{Q+1}`.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.q).map(|b| self.breakpoint(b)).collect()
    }

    /// Bin `[a_b, a_{b+1}]` containing `x`; a point on an interior
    /// breakpoint belongs to the lower bin.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(-2.0..=2.0).contains(&x) {
            return None;
        }
        let guess = (((x + 2.0) / self.width()).ceil() as usize).clamp(1, self.q) - 1;
        // Correct for rounding in the division against the stored breakpoints.
        let mut b = guess;
        while b > 0 && x <= self.breakpoint(b) {
            b -= 1;
        }
        while b + 1 < self.q && x > self.breakpoint(b + 1) {
            b += 1;
        }
        Some(b)
    }

    /// `ρ_sc([a_b, a_{b+1}])` for every bin.
    pub fn semicircle_masses(&self) -> Vec<f64> {
        (0..self.q)
            .map(|b| SemicircleLaw.interval_mass(self.breakpoint(b), self.breakpoint(b + 1)))
            .collect()
    }
}

/// Eigenvalue counts per bin.
pub fn bin_counts(d_minor: &SpectralDecomposition, part: &BinPartition) -> Vec<usize> {
    bin_counts_of(d_minor.eigenvalues(), part)
}

pub fn bin_counts_of(eigenvalues: &[f64], part: &BinPartition) -> Vec<usize> {
    let mut counts = vec![0; part.bins()];
    for &x in eigenvalues {
        if let Some(b) = part.bin_of(x) {
            counts[b] += 1;
        }
    }
    counts
}

fn partition_condition(q: usize, epsilon: f64) -> bool {
    let l = 4.0 / q as f64;
    1.0 / (1.0 + 1.0 / (std::f64::consts::PI * (3.0 * l).sqrt())) < epsilon * epsilon / 4.0
}

/// Smallest `Q ≥ 5` with `1/(1 + 1/(π√(3l))) < ε²/4`, `l = 4/Q`.
pub fn choose_partition(epsilon: f64) -> Result<BinPartition> {
    choose_partition_capped(epsilon, PARTITION_CAP)
}

pub fn choose_partition_capped(epsilon: f64, cap: usize) -> Result<BinPartition> {
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::param(
            "epsilon",
            format!("need 0 < ε ≤ 2, got {epsilon}"),
        ));
    }
    let c = epsilon * epsilon / 4.0;
    // Solving for l: the condition reads Q > 12π²(1/c − 1)².
    let estimate = if c >= 1.0 {
        5.0
    } else {
        12.0 * std::f64::consts::PI.powi(2) * (1.0 / c - 1.0).powi(2)
    };
    if estimate > 2.0 * cap as f64 {
        return Err(Error::Unsupported(format!(
            "ε = {epsilon} needs about {estimate:.3e} bins, cap is {cap}"
        )));
    }
    let mut q = (estimate.floor() as usize).max(5);
    while q > 5 && partition_condition(q - 1, epsilon) {
        q -= 1;
    }
    while !partition_condition(q, epsilon) {
        q += 1;
    }
    if q > cap {
        return Err(Error::Unsupported(format!(
            "ε = {epsilon} needs {q} bins, cap is {cap}"
        )));
    }
    BinPartition::new(q)
}

/// `l^{3/2}/(π√3)`, a lower bound on the semicircle mass of every bin.
pub fn edge_bin_lower_bound(part: &BinPartition) -> f64 {
    part.width().powf(1.5) / (std::f64::consts::PI * 3f64.sqrt())
}

/// Terms of the coordinate identity for eigenvalue `lambda_i` of the full
/// matrix: `Σ_j (Λ_j(minor) − λ_i)^{−2} ⟨u_j(minor), x⟩²`.
pub fn identity_denominator(
    minor: &SpectralDecomposition,
    x: &[f64],
    lambda_i: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (j, u) in minor.vectors().enumerate() {
        let gap = minor.eigenvalues()[j] - lambda_i;
        if gap.abs() <= SPECTRAL_SLACK {
            return Err(Error::Degenerate(format!(
                "minor eigenvalue {} within {SPECTRAL_SLACK:e} of {lambda_i}",
                minor.eigenvalues()[j]
            )));
        }
        let p = dot(u, x);
        sum += p * p / (gap * gap);
    }
    Ok(sum)
}

/// `| |u_i(coord)|² − 1/(1 + Σ_j …) |` from precomputed decompositions of
/// `B` and of `B` with row and column `coord` deleted.
pub fn coordinate_identity_residual_with(
    full: &SpectralDecomposition,
    minor: &SpectralDecomposition,
    x: &[f64],
    i: usize,
    coord: usize,
) -> Result<f64> {
    check_minor_shape(full, minor)?;
    if i >= full.n() || coord >= full.n() {
        return Err(Error::param(
            "i",
            format!("index out of range for n = {}", full.n()),
        ));
    }
    let entry = full.vector(i)[coord];
    let rhs = 1.0 / (1.0 + identity_denominator(minor, x, full.eigenvalues()[i])?);
    Ok((entry * entry - rhs).abs())
}

/// Residual of the coordinate identity for eigenvector `i`, coordinate
/// `coord` of `b`.
pub fn coordinate_identity_residual(b: &SymmetricMatrix, i: usize, coord: usize) -> Result<f64> {
    if coord >= b.n() {
        return Err(Error::param(
            "coord",
            format!("out of range for n = {}", b.n()),
        ));
    }
    let full = linalg::eigen_decompose_with(b, EigenBackend::Auto)?;
    let minor = linalg::eigen_decompose_with(&b.minor(coord), EigenBackend::Auto)?;
    coordinate_identity_residual_with(&full, &minor, &b.off_diagonal_column(coord), i, coord)
}

/// For each eigenvalue of the full matrix lying in a bin of `part`, the
/// pair `(Σ_j (Λ_j − Λ_i)^{−2}⟨u_j, x⟩², l^{−2} ‖π_{H(q)} x‖²)` where
/// `H(q)` is spanned by the minor eigenvectors in the same bin. The first
/// entry is never below the second.
pub fn denominator_bounds(
    full: &SpectralDecomposition,
    minor: &SpectralDecomposition,
    x: &[f64],
    part: &BinPartition,
) -> Result<Vec<(f64, f64)>> {
    check_minor_shape(full, minor)?;
    let overlap: Vec<f64> = minor.vectors().map(|u| dot(u, x).powi(2)).collect();
    let mut per_bin = vec![0.0; part.bins()];
    for (j, &lam) in minor.eigenvalues().iter().enumerate() {
        if let Some(b) = part.bin_of(lam) {
            per_bin[b] += overlap[j];
        }
    }
    let inv_l2 = part.width().powi(-2);
    let mut out = Vec::new();
    for &lam in full.eigenvalues() {
        if let Some(b) = part.bin_of(lam) {
            out.push((identity_denominator(minor, x, lam)?, inv_l2 * per_bin[b]));
        }
    }
    Ok(out)
}

fn check_minor_shape(full: &SpectralDecomposition, minor: &SpectralDecomposition) -> Result<()> {
    if full.n() == 0 || minor.n() + 1 != full.n() {
        return Err(Error::param(
            "minor",
            format!(
                "dimension {} does not match full dimension {}",
                minor.n(),
                full.n()
            ),
        ));
    }
    Ok(())
}

/// Cauchy interlacing `Λ_i(full) ≤ Λ_i(minor) ≤ Λ_{i+1}(full)`.
pub fn interlacing_check(
    full: &SpectralDecomposition,
    minor: &SpectralDecomposition,
) -> Result<bool> {
    check_minor_shape(full, minor)?;
    Ok(interlaces(full.eigenvalues(), minor.eigenvalues()))
}

/// Interlacing on raw ascending sequences with [`SPECTRAL_SLACK`] scaled
/// by `max(1, max|Λ|)`.
pub fn interlaces(full: &[f64], minor: &[f64]) -> bool {
    if minor.len() + 1 != full.len() {
        return false;
    }
    let scale = full.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = SPECTRAL_SLACK * scale;
    minor
        .iter()
        .enumerate()
        .all(|(i, &mu)| full[i] <= mu + tol && mu <= full[i + 1] + tol)
}

/// `max_i |a_i − b_i|` over two ascending spectra of equal length.
pub fn weyl_gap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param(
            "b",
            format!("length {} vs {}", b.len(), a.len()),
        ));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Smallest gap between consecutive ascending eigenvalues.
pub fn min_spacing(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Eigenbasis of a (scaled) adjacency matrix assembled component by
/// component: every isolated vertex contributes its coordinate vector,
/// and each larger component is diagonalized on its own and embedded.
pub fn canonical_basis(m: &SparseSymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = m.n();
    let mut pairs = Vec::with_capacity(n);
    for comp in m.connected_components() {
        if let [v] = comp[..] {
            let mut e = vec![0.0; n];
            e[v] = 1.0;
            let diag = m.row(v).find(|&(j, _)| j == v).map_or(0.0, |(_, w)| w);
            pairs.push((diag, e));
            continue;
        }
        let local = linalg::eigen_decompose_with(&m.dense_principal(&comp), EigenBackend::Auto)?;
        for (k, u) in local.vectors().enumerate() {
            let mut e = vec![0.0; n];
            for (&v, &x) in comp.iter().zip(u) {
                e[v] = x;
            }
            pairs.push((local.eigenvalues()[k], e));
        }
    }
    SpectralDecomposition::from_pairs(n, pairs)
}

/// Per-sample delocalization measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct DelocalizationReport {
    pub n: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// `‖u_i(B)‖_∞` in eigenvalue order.
    pub infinity_norms: Vec<f64>,
    pub delocalized_fraction: f64,
    pub bulk_fraction: f64,
    /// Bin counts of the minor of `B` with `coord` deleted, when a
    /// partition was supplied.
    pub bin_counts: Option<Vec<usize>>,
    /// `max_i |Λ_i(B) − Λ_i(A)|`.
    pub weyl_gap: f64,
    pub min_spacing: f64,
}

impl DelocalizationReport {
    /// Perturb `a`, diagonalize both, and measure.
    pub fn measure(
        a: &SymmetricMatrix,
        lambda: f64,
        epsilon: f64,
        spec: &PerturbationSpec,
        minor: Option<(usize, &BinPartition)>,
    ) -> Result<Self> {
        spec.validate()?;
        let b = perturb(a, spec);
        let d = linalg::eigen_decompose_with(&b, EigenBackend::Auto)?;
        let a_vals = linalg::eigenvalues(a, EigenBackend::Auto)?;
        let norms = infinity_norms(&d);
        let bin_counts = match minor {
            Some((coord, part)) => {
                if coord >= b.n() {
                    return Err(Error::param("coord", "out of range"));
                }
                let vals = linalg::eigenvalues(&b.minor(coord), EigenBackend::Auto)?;
                Some(bin_counts_of(&vals, part))
            }
            None => None,
        };
        Ok(Self {
            n: a.n(),
            lambda,
            epsilon,
            delocalized_fraction: delocalized_fraction(&norms, epsilon)?,
            infinity_norms: norms,
            bulk_fraction: bulk_fraction(&d),
            bin_counts,
            weyl_gap: weyl_gap(d.eigenvalues(), &a_vals)?,
            min_spacing: min_spacing(d.eigenvalues()),
        })
    }
}

/// Default deviation thresholds of the projection probe.
pub const PROBE_T_GRID: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Concentration of `‖π_H(Y)‖` around `√k` for a random `k`-dimensional
/// subspace `H` of `ℝⁿ` and `Y` with independent uniform ±1 coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProbe {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// `‖π_H(Y)‖ − √k` per trial.
    pub deviations: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Fraction of trials with `|deviation| ≥ t`, per grid point.
    pub exceedance: Vec<f64>,
    pub orthonormality_error: f64,
    /// `√(√n log n)`, reported for reference only.
    pub t_n: f64,
}

impl ProjectionProbe {
    /// `10 e^{−t²/4}`.
    pub fn tail_bound(t: f64) -> f64 {
        10.0 * (-t * t / 4.0).exp()
    }

    /// Binomial standard error of an exceedance rate `p` over the trials.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

pub fn projection_concentration_probe(
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<ProjectionProbe> {
    if k > n {
        return Err(Error::param(
            "k",
            format!("subspace dimension {k} exceeds n = {n}"),
        ));
    }
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let mut rng = stream(seed);
    let basis = random_orthonormal(n, k, &mut rng);
    let orthonormality_error = gram_error(&basis, n, k);
    let root_k = (k as f64).sqrt();
    let mut y = vec![0.0; n];
    let deviations: Vec<f64> = (0..trials)
        .map(|_| {
            fill_signs(&mut y, &mut rng);
            let norm = if k == n {
                // The projection is the identity.
                dot(&y, &y).sqrt()
            } else {
                basis
                    .chunks_exact(n.max(1))
                    .map(|h| dot(h, &y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            norm - root_k
        })
        .collect();
    let t_grid = PROBE_T_GRID.to_vec();
    let exceedance = t_grid
        .iter()
        .map(|&t| deviations.iter().filter(|d| d.abs() >= t).count() as f64 / trials as f64)
        .collect();
    let nf = n as f64;
    Ok(ProjectionProbe {
        n,
        k,
        trials,
        deviations,
        t_grid,
        exceedance,
        orthonormality_error,
        t_n: if n > 1 {
            (nf.sqrt() * nf.ln()).sqrt()
        } else {
            0.0
        },
    })
}

fn fill_signs<R: RngCore>(y: &mut [f64], rng: &mut R) {
    for chunk in y.chunks_mut(64) {
        let bits = rng.next_u64();
        for (b, v) in chunk.iter_mut().enumerate() {
            *v = if bits >> b & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

/// `k` orthonormal vectors of length `n`, stored contiguously: Gaussian
/// vectors orthogonalized by modified Gram–Schmidt, applied twice.
fn random_orthonormal<R: RngCore>(n: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut normal = BoxMuller::new();
    let mut basis: Vec<f64> = Vec::with_capacity(n * k);
    while basis.len() < n * k {
        let mut v: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        for _ in 0..2 {
            for h in basis.chunks_exact(n) {
                let p = dot(h, &v);
                v.iter_mut().zip(h).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = dot(&v, &v).sqrt();
        // A draw (numerically) inside the current span is discarded.
        if norm > 1e-6 {
            basis.extend(v.iter().map(|x| x / norm));
        }
    }
    basis
}

fn gram_error(basis: &[f64], n: usize, k: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..=i {
            let g = dot(&basis[i * n..(i + 1) * n], &basis[j * n..(j + 1) * n]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
