//! Population dynamics for the resolvent recursion on the Poisson(λ)
//! Galton–Watson tree with edge weights `1/√λ`:
//!
//! ```text
//! R(z)  =d  −1 / (z + (1/λ) Σ_{k=1}^{K} R_k(z)),   K ~ Pois(λ),
//! ```
//!
//! with `R_k` i.i.d. copies of `R`. A population of samples is pushed
//! through this map generation by generation; its mean estimates the
//! Stieltjes transform `S_λ(z) = E R(z)` of the limiting spectral
//! distribution `ν_λ`.
//!
//! A population can carry several spectral points at once. Every member
//! then draws a single `K` and a single set of parent indices, shared by all
//! points (common random numbers). Grids of `z` values cost one draw per
//! member instead of one per point, and the estimated curves are smooth in
//! `z`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, index, stream, Poisson};

/// A point `z` off the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint(Complex64);

impl SpectralPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !(z.im != 0.0 && z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain(format!("{z}")));
        }
        Ok(Self(z))
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    #[inline]
    pub fn z(&self) -> Complex64 {
        self.0
    }

    /// `−z̄`, the mirror image across the imaginary axis.
    pub fn reflected(&self) -> Self {
        Self(-self.0.conj())
    }
}

/// Stieltjes transform of the semicircle law, `−(z − √(z−2)√(z+2))/2`.
///
/// Taking the product of two principal roots instead of the principal root
/// of `z² − 4` selects the Herglotz branch everywhere off the real axis,
/// including across `Re z ∈ [−2, 2]`.
pub fn semicircle_stieltjes(z: SpectralPoint) -> Complex64 {
    let z = z.z();
    let root = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    -0.5 * (z - root)
}

/// Initial state of a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationInit {
    /// Every sample `−1/z`, the resolvent of a childless root.
    #[default]
    Leaf,
    /// Every sample at the semicircle transform `S_sc(z)`.
    Semicircle,
}

/// A generation of resolvent samples at one or more spectral points.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventPopulation {
    lambda: f64,
    points: Vec<SpectralPoint>,
    size: usize,
    /// Member-major: member `m`, point `p` at `m * points.len() + p`.
    samples: Vec<Complex64>,
    sweeps: usize,
}

/// Population of `size` copies of `−1/z` at a single point.
pub fn population_init(size: usize, z: SpectralPoint, lambda: f64) -> Result<ResolventPopulation> {
    ResolventPopulation::new(size, &[z], lambda, PopulationInit::Leaf)
}

impl ResolventPopulation {
    pub fn new(
        size: usize,
        points: &[SpectralPoint],
        lambda: f64,
        init: PopulationInit,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::param(
                "size",
                "population must have at least one member",
            ));
        }
        if points.is_empty() {
            return Err(Error::param("points", "need at least one spectral point"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(
                "lambda",
                format!("must be positive, got {lambda}"),
            ));
        }
        let row: Vec<Complex64> = points
            .iter()
            .map(|&p| match init {
                PopulationInit::Leaf => -p.z().inv(),
                PopulationInit::Semicircle => semicircle_stieltjes(p),
            })
            .collect();
        let samples = row
            .iter()
            .copied()
            .cycle()
            .take(size * points.len())
            .collect();
        Ok(Self {
            lambda,
            points: points.to_vec(),
            size,
            samples,
            sweeps: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn points(&self) -> &[SpectralPoint] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Completed sweeps since initialization.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Samples at point `p`, one per member.
    pub fn samples_at(&self, p: usize) -> impl Iterator<Item = Complex64> + '_ {
        let stride = self.points.len();
        self.samples[p..].iter().step_by(stride).copied()
    }

    /// Largest `|R_k| · |Im z|` over members and points; at most 1.
    pub fn max_scaled_modulus(&self) -> f64 {
        let stride = self.points.len();
        self.samples
            .iter()
            .enumerate()
            .map(|(i, r)| r.norm() * self.points[i % stride].z().im.abs())
            .fold(0.0, f64::max)
    }

    /// Smallest `Im R_k · sign(Im z)`; non-negative for a Herglotz population.
    pub fn min_signed_imag(&self) -> f64 {
        let stride = self.points.len();
        self.samples
            .iter()
            .enumerate()
            .map(|(i, r)| r.im * self.points[i % stride].z().im.signum())
            .fold(f64::INFINITY, f64::min)
    }

    /// Population means, one per point.
    pub fn estimates(&self) -> Vec<Complex64> {
        let stride = self.points.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); stride];
        for row in self.samples.chunks_exact(stride) {
            for (a, r) in acc.iter_mut().zip(row) {
                *a += r;
            }
        }
        let inv = 1.0 / self.size as f64;
        acc.into_iter().map(|a| a * inv).collect()
    }

    /// Same population at the mirrored points `−z̄` with samples `−R̄`.
    pub fn reflected(&self) -> Self {
        Self {
            lambda: self.lambda,
            points: self.points.iter().map(SpectralPoint::reflected).collect(),
            size: self.size,
            samples: self.samples.iter().map(|r| -r.conj()).collect(),
            sweeps: self.sweeps,
        }
    }
}

/// One synchronous generation of the recursion.
///
/// Member `m` of the new generation draws `K ~ Pois(λ)` and `K` parents
/// uniformly with replacement from the current generation, using a stream
/// keyed by `(seed, m)`; the output is therefore independent of thread
/// count. Each parent's row (all points) is read contiguously.
pub fn rde_sweep(pop: &ResolventPopulation, seed: u64) -> ResolventPopulation {
    let stride = pop.points.len();
    let zs: Vec<Complex64> = pop.points.iter().map(SpectralPoint::z).collect();
    let poisson = Poisson::new(pop.lambda);
    let inv_lambda = 1.0 / pop.lambda;
    let mut next = vec![Complex64::new(0.0, 0.0); pop.samples.len()];

    next.par_chunks_mut(stride).enumerate().for_each_init(
        || (vec![Complex64::new(0.0, 0.0); stride], Vec::new()),
        |(acc, parents), (m, out_row)| {
            let mut rng = stream(derive_seed(seed, &[m as u64]));
            let k = poisson.sample(&mut rng);
            parents.clear();
            parents.extend((0..k).map(|_| index(&mut rng, pop.size) * stride));
            for &base in parents.iter().take(PREFETCH_DISTANCE) {
                prefetch_row(&pop.samples[base..base + stride]);
            }
            acc.fill(Complex64::new(0.0, 0.0));
            for (t, &base) in parents.iter().enumerate() {
                if let Some(&ahead) = parents.get(t + PREFETCH_DISTANCE) {
                    prefetch_row(&pop.samples[ahead..ahead + stride]);
                }
                for (a, r) in acc.iter_mut().zip(&pop.samples[base..base + stride]) {
                    *a += r;
                }
            }
            for ((out, a), z) in out_row.iter_mut().zip(acc.iter()).zip(&zs) {
                *out = -(z + a * inv_lambda).inv();
            }
        },
    );

    ResolventPopulation {
        lambda: pop.lambda,
        points: pop.points.clone(),
        size: pop.size,
        samples: next,
        sweeps: pop.sweeps + 1,
    }
}

/// Parent rows requested ahead of use; the gathers are random reads from
/// a population far larger than the private caches.
const PREFETCH_DISTANCE: usize = 4;

#[inline(always)]
fn prefetch_row(row: &[Complex64]) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let bytes = std::mem::size_of_val(row);
        let ptr = row.as_ptr() as *const i8;
        for offset in (0..bytes).step_by(64) {
            // SAFETY: prefetch is a hint and never faults; the address lies
            // inside `row`.
            unsafe { _mm_prefetch(ptr.add(offset), _MM_HINT_T0) };
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = row;
}

/// Mean of the samples at the first point.
pub fn stieltjes_estimate(pop: &ResolventPopulation) -> Complex64 {
    pop.estimates()[0]
}

/// `Im S(E + iη)/π` for each `(E, S)`.
pub fn invert_stieltjes(values: &[(f64, Complex64)], eta: f64) -> Result<Vec<(f64, f64)>> {
    if !(eta > 0.0) {
        return Err(Error::param("eta", format!("must be positive, got {eta}")));
    }
    Ok(values
        .iter()
        .map(|&(e, s)| (e, s.im / std::f64::consts::PI))
        .collect())
}

/// Evenly spaced energies `from, from + step, …` up to `to` inclusive.
pub fn energy_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || from > to {
        return Err(Error::param(
            "step",
            format!("bad grid [{from}, {to}] step {step}"),
        ));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| from + i as f64 * step).collect())
}

/// Spectral points `E + iη` for each energy.
pub fn points_on_line(energies: &[f64], eta: f64) -> Result<Vec<SpectralPoint>> {
    energies
        .iter()
        .map(|&e| SpectralPoint::from_parts(e, eta))
        .collect()
}

/// Stopping rule and size for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdeConfig {
    pub population: usize,
    pub sweep_cap: usize,
    pub burn_in: usize,
    pub tolerance: f64,
    pub init: PopulationInit,
}

impl Default for RdeConfig {
    fn default() -> Self {
        Self {
            population: 100_000,
            sweep_cap: 500,
            burn_in: 100,
            tolerance: 1e-3,
            init: PopulationInit::Leaf,
        }
    }
}

impl RdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::config("rde.population", "must be at least 1"));
        }
        if self.sweep_cap == 0 || self.burn_in >= self.sweep_cap {
            return Err(Error::config(
                "rde.sweep_cap",
                format!(
                    "need sweep_cap > burn_in, got {} and {}",
                    self.sweep_cap, self.burn_in
                ),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("rde.tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// Output of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RdeSolution {
    pub points: Vec<SpectralPoint>,
    /// Average of the population means over the post-burn-in sweeps.
    pub estimates: Vec<Complex64>,
    /// Population means after the final sweep.
    pub final_means: Vec<Complex64>,
    pub sweeps: usize,
    pub converged: bool,
    /// `max_z` change of the averaged estimate at the last sweep.
    pub last_change: f64,
    /// `max_z` change of the raw population mean at the last sweep.
    pub last_sweep_change: f64,
}

/// Run the recursion to stationarity and average the population mean.
///
/// After `burn_in` sweeps the population means are averaged over the
/// following sweeps; iteration stops once the averaged estimate moves by
/// less than `tolerance` at every point, or at `sweep_cap`.
pub fn solve(
    lambda: f64,
    points: &[SpectralPoint],
    cfg: &RdeConfig,
    seed: u64,
) -> Result<RdeSolution> {
    cfg.validate()?;
    let mut pop = ResolventPopulation::new(cfg.population, points, lambda, cfg.init)?;
    let mut prev_means = pop.estimates();
    let mut avg = vec![Complex64::new(0.0, 0.0); points.len()];
    let mut averaged = 0usize;
    let mut last_change = f64::INFINITY;
    let mut last_sweep_change = f64::INFINITY;
    let mut converged = false;
    for sweep in 1..=cfg.sweep_cap {
        pop = rde_sweep(&pop, derive_seed(seed, &[sweep as u64]));
        let means = pop.estimates();
        last_sweep_change = max_gap(&means, &prev_means);
        if sweep > cfg.burn_in {
            averaged += 1;
            let w = 1.0 / averaged as f64;
            let next: Vec<Complex64> = avg
                .iter()
                .zip(&means)
                .map(|(a, m)| a + (m - a) * w)
                .collect();
            if averaged > 1 {
                last_change = max_gap(&next, &avg);
                if last_change < cfg.tolerance {
                    converged = true;
                }
            }
            avg = next;
        }
        prev_means = means;
        if converged {
            break;
        }
    }
    Ok(RdeSolution {
        points: points.to_vec(),
        estimates: avg,
        final_means: prev_means,
        sweeps: pop.sweeps(),
        converged,
        last_change,
        last_sweep_change,
    })
}

fn max_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(re: f64, im: f64) -> SpectralPoint {
        SpectralPoint::from_parts(re, im).unwrap()
    }

    #[test]
    fn real_points_are_rejected() {
        assert!(matches!(
            SpectralPoint::from_parts(1.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(SpectralPoint::from_parts(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn semicircle_transform_at_i() {
        let s = semicircle_stieltjes(pt(0.0, 1.0));
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!(s.re.abs() < 1e-15);
        assert!((s.im - golden).abs() < 1e-15);
    }

    #[test]
    fn semicircle_transform_is_self_consistent_and_herglotz() {
        let z = pt(1.0, 1.0);
        let s = semicircle_stieltjes(z);
        assert!((s + (z.z() + s).inv()).norm() <= 1e-12);
        for i in 0..100 {
            let re = -5.0 + 0.1 * i as f64;
            for im in [1e-3, 0.1, 2.0] {
                let z = pt(re, im);
                let s = semicircle_stieltjes(z);
                assert!(s.im > 0.0, "z = {}", z.z());
                assert!((s + (z.z() + s).inv()).norm() <= 1e-10);
                let lower = semicircle_stieltjes(pt(re, -im));
                assert!((lower - s.conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn init_values() {
        let p = population_init(4, pt(0.0, 1.0), 2.0).unwrap();
        assert!(p.samples_at(0).all(|r| r == c(0.0, 1.0)));
        let p = population_init(3, pt(0.0, 2.0), 2.0).unwrap();
        assert!(p.samples_at(0).all(|r| r == c(0.0, 0.5)));
        assert_eq!(p.max_scaled_modulus(), 1.0);
        assert!(population_init(0, pt(0.0, 1.0), 2.0).is_err());
        for (re, im) in [(0.3, 0.01), (-4.0, 0.5), (1.0, -0.2)] {
            let p = population_init(2, pt(re, im), 1.0).unwrap();
            assert!(p.max_scaled_modulus() <= 1.0 + 1e-15);
            assert!(p.min_signed_imag() >= 0.0);
        }
    }

    #[test]
    fn zero_offspring_gives_leaf_resolvent() {
        // λ tiny: K = 0 with overwhelming probability.
        let z = pt(0.4, 0.3);
        let pop = ResolventPopulation::new(50, &[z], 1e-12, PopulationInit::Semicircle).unwrap();
        let next = rde_sweep(&pop, 5);
        assert!(next.samples_at(0).all(|r| r == -z.z().inv()));
    }

    #[test]
    fn imaginary_axis_is_preserved() {
        let pop = population_init(2_000, pt(0.0, 0.3), 3.0).unwrap();
        let mut pop = pop;
        for s in 0..5 {
            pop = rde_sweep(&pop, s);
            assert!(pop.samples_at(0).all(|r| r.re == 0.0 && r.im > 0.0));
        }
    }

    #[test]
    fn bound_and_herglotz_preserved() {
        let pts: Vec<_> = [(-2.5, 0.05), (0.0, 2.0), (1.9, 0.1), (0.7, -0.2)]
            .iter()
            .map(|&(a, b)| pt(a, b))
            .collect();
        let mut pop = ResolventPopulation::new(3_000, &pts, 4.0, PopulationInit::Leaf).unwrap();
        for s in 0..20 {
            pop = rde_sweep(&pop, 100 + s);
            assert!(pop.max_scaled_modulus() <= 1.0 + 1e-12);
            assert!(pop.min_signed_imag() >= 0.0);
        }
        assert_eq!(pop.sweeps(), 20);
    }

    #[test]
    fn sweeps_are_deterministic_and_pointwise() {
        let pts: Vec<_> = (0..40).map(|i| pt(-2.0 + 0.1 * i as f64, 0.1)).collect();
        let grid = ResolventPopulation::new(500, &pts, 6.0, PopulationInit::Leaf).unwrap();
        let a = rde_sweep(&rde_sweep(&grid, 1), 2);
        let b = rde_sweep(&rde_sweep(&grid, 1), 2);
        assert_eq!(a, b);
        // Point 23 run alone sees the same random numbers.
        let single =
            ResolventPopulation::new(500, &pts[23..24], 6.0, PopulationInit::Leaf).unwrap();
        let s = rde_sweep(&rde_sweep(&single, 1), 2);
        let lhs: Vec<_> = a.samples_at(23).collect();
        let rhs: Vec<_> = s.samples_at(0).collect();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn reflection_symmetry_is_exact_with_shared_seeds() {
        let pts = [pt(0.8, 0.2), pt(-1.5, 0.05)];
        let pop = ResolventPopulation::new(800, &pts, 3.0, PopulationInit::Leaf).unwrap();
        let mirror = pop.reflected();
        let mut a = pop;
        let mut b = mirror;
        for s in 0..6 {
            a = rde_sweep(&a, s);
            b = rde_sweep(&b, s);
        }
        assert_eq!(a.reflected(), b);
    }

    #[test]
    fn estimate_of_constant_population() {
        let p = population_init(10, pt(0.0, 1.0), 1.0).unwrap();
        assert_eq!(stieltjes_estimate(&p), c(0.0, 1.0));
    }

    #[test]
    fn inversion() {
        let s0 = semicircle_stieltjes(pt(0.0, 0.01));
        let s3 = semicircle_stieltjes(pt(3.0, 0.01));
        let out = invert_stieltjes(&[(0.0, s0), (3.0, s3)], 0.01).unwrap();
        assert!((out[0].1 - 1.0 / std::f64::consts::PI).abs() < 0.01);
        assert!(out[1].1 <= 0.01 && out[1].1 >= 0.0);
        assert!(invert_stieltjes(&[], 0.0).is_err());
        assert!(invert_stieltjes(&[], -1.0).is_err());
    }

    #[test]
    fn grid() {
        let g = energy_grid(-3.0, 3.0, 0.1).unwrap();
        assert_eq!(g.len(), 61);
        assert!((g[60] - 3.0).abs() < 1e-12);
        assert!(energy_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn solve_converges_for_large_lambda() {
        let pts = [pt(0.5, 0.5)];
        let cfg = RdeConfig {
            population: 20_000,
            sweep_cap: 200,
            burn_in: 20,
            tolerance: 1e-3,
            init: PopulationInit::Leaf,
        };
        let sol = solve(64.0, &pts, &cfg, 9).unwrap();
        assert!(sol.converged);
        assert!(sol.last_sweep_change < 1e-3, "{}", sol.last_sweep_change);
        let gap = (sol.estimates[0] - semicircle_stieltjes(pts[0])).norm();
        assert!(gap < 0.02, "{gap}");
    }
}
