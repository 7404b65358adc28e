//! Empirical spectral distributions and the semicircle reference law.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::SpectralDecomposition;
use crate::walks::WalkCoefficientTable;

/// Uniform probability measure on a finite multiset of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Sorts the atoms. Panics on NaN.
    pub fn new(mut atoms: Vec<f64>) -> Self {
        assert!(atoms.iter().all(|a| !a.is_nan()), "NaN atom");
        atoms.sort_by(f64::total_cmp);
        Self { atoms }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    /// `(1/n) Σ x^k`.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        self.atoms.iter().map(|x| x.powi(k as i32)).sum::<f64>() / self.atoms.len() as f64
    }

    /// Mass of `(-∞, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= x) as f64 / self.atoms.len() as f64
    }

    /// Poisson-kernel smoothing at scale `eta`:
    /// `(1/n) Σ_i η / (π((x_i − e)² + η²))`, the density of the measure
    /// convolved with a Cauchy law of width `eta`.
    pub fn smoothed_density(&self, e: f64, eta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|x| eta / ((x - e).powi(2) + eta * eta))
            .sum::<f64>()
            / (PI * self.atoms.len() as f64)
    }
}

/// The standard semicircle law on `[−2, 2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SemicircleLaw;

impl SemicircleLaw {
    pub fn density(&self, x: f64) -> f64 {
        semicircle_density(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        semicircle_cdf(x)
    }

    pub fn moment(&self, k: u32) -> f64 {
        crate::walks::semicircle_moment(k)
    }

    /// `ρ_sc([a, b])` from the closed-form distribution function.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        (semicircle_cdf(b) - semicircle_cdf(a)).max(0.0)
    }
}

/// `(1/2π)√(4 − x²)` on `[−2, 2]`, zero outside.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

/// `1/2 + x√(4 − x²)/(4π) + arcsin(x/2)/π`, clamped outside the support.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

/// Empirical spectral distribution of a decomposition.
pub fn esd(d: &SpectralDecomposition) -> EmpiricalMeasure {
    EmpiricalMeasure::new(d.eigenvalues().to_vec())
}

/// Fraction of atoms in the closed interval `[a, b]`.
pub fn interval_mass(m: &EmpiricalMeasure, a: f64, b: f64) -> Result<f64> {
    if a > b || a.is_nan() || b.is_nan() {
        return Err(Error::param(
            "a",
            format!("interval [{a}, {b}] is empty or undefined"),
        ));
    }
    let lo = m.atoms.partition_point(|&x| x < a);
    let hi = m.atoms.partition_point(|&x| x <= b);
    Ok((hi - lo) as f64 / m.atoms.len() as f64)
}

/// `(1/n) Σ_i Λ_i^k`.
pub fn esd_moment(d: &SpectralDecomposition, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    d.eigenvalues()
        .iter()
        .map(|x| x.powi(k as i32))
        .sum::<f64>()
        / d.n() as f64
}

/// Exact `E⟨ν_{n,λ}, x^k⟩` by walk enumeration.
pub fn expected_moment_finite_n(k: usize, lambda: f64, n: usize) -> Result<f64> {
    WalkCoefficientTable::build(k)?.expected_moment(n, lambda)
}

/// `sup_x |F_m(x) − F_sc(x)|`.
///
/// The empirical CDF is a step function and `F_sc` is continuous, so the
/// supremum is attained at an atom, approached from the left or the right.
pub fn kolmogorov_distance(m: &EmpiricalMeasure, reference: &SemicircleLaw) -> f64 {
    assert!(!m.is_empty(), "empty measure");
    let n = m.atoms.len() as f64;
    let mut worst = 0.0f64;
    let mut i = 0;
    while i < m.atoms.len() {
        let x = m.atoms[i];
        let mut j = i;
        while j < m.atoms.len() && m.atoms[j] == x {
            j += 1;
        }
        let f = reference.cdf(x);
        worst = worst
            .max((i as f64 / n - f).abs())
            .max((j as f64 / n - f).abs());
        i = j;
    }
    worst
}
