//! Seed derivation and the small set of samplers the simulations need.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed. Seeds for sub-tasks (one graph, one perturbation, one population
//! sweep) are derived from a master seed by [`derive_seed`], which chains the
//! SplitMix64 finalizer over a list of integer labels. The derivation depends
//! only on the labels, never on execution order, so parallel runs reproduce
//! serial ones bit for bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mix a master seed with an ordered list of labels into a child seed.
///
/// `derive_seed(s, &[a, b]) != derive_seed(s, &[b, a])` in general, and an
/// empty label list returns `splitmix64(s)`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(master), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

/// A reproducible stream for `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Map 64 random bits to a double in `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal deviates by the Box–Muller transform, caching the
/// second variate of each pair.
#[derive(Debug, Clone, Default)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new() -> Self {
        Self { spare: None }
    }

    pub fn sample<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so the logarithm is finite.
        let u1 = 1.0 - unit_f64(rng.next_u64());
        let u2 = unit_f64(rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Below this mean the Poisson sampler uses sequential-search inversion.
pub const POISSON_INVERSION_MAX: f64 = 30.0;

/// Exact Poisson sampler: inversion by sequential search for small means,
/// Hörmann's transformed rejection with squeeze (PTRS) above
/// [`POISSON_INVERSION_MAX`].
#[derive(Debug, Clone)]
pub struct Poisson {
    lambda: f64,
    kind: PoissonKind,
}

#[derive(Debug, Clone)]
enum PoissonKind {
    Zero,
    Inversion { exp_neg_lambda: f64 },
    Ptrs(PtrsConstants),
}

#[derive(Debug, Clone)]
struct PtrsConstants {
    ln_lambda: f64,
    a: f64,
    b: f64,
    ln_inv_alpha: f64,
    v_r: f64,
}

impl Poisson {
    /// Panics if `lambda` is negative or not finite.
    pub fn new(lambda: f64) -> Self {
        assert!(
            lambda.is_finite() && lambda >= 0.0,
            "Poisson mean must be finite and non-negative"
        );
        let kind = if lambda == 0.0 {
            PoissonKind::Zero
        } else if lambda <= POISSON_INVERSION_MAX {
            PoissonKind::Inversion {
                exp_neg_lambda: (-lambda).exp(),
            }
        } else {
            let slam = lambda.sqrt();
            let b = 0.931 + 2.53 * slam;
            let a = -0.059 + 0.02483 * b;
            let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
            let v_r = 0.9277 - 3.6224 / (b - 2.0);
            PoissonKind::Ptrs(PtrsConstants {
                ln_lambda: lambda.ln(),
                a,
                b,
                ln_inv_alpha: inv_alpha.ln(),
                v_r,
            })
        };
        Self { lambda, kind }
    }

    pub fn mean(&self) -> f64 {
        self.lambda
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> u64 {
        match &self.kind {
            PoissonKind::Zero => 0,
            PoissonKind::Inversion { exp_neg_lambda } => {
                let u = unit_f64(rng.next_u64());
                let mut k = 0u64;
                let mut p = *exp_neg_lambda;
                let mut cdf = p;
                while u > cdf {
                    k += 1;
                    p *= self.lambda / k as f64;
                    let next = cdf + p;
                    // Tail mass below double resolution.
                    if next == cdf {
                        break;
                    }
                    cdf = next;
                }
                k
            }
            PoissonKind::Ptrs(c) => loop {
                let u = unit_f64(rng.next_u64()) - 0.5;
                let v = unit_f64(rng.next_u64());
                let us = 0.5 - u.abs();
                let k = ((2.0 * c.a / us + c.b) * u + self.lambda + 0.43).floor();
                if us >= 0.07 && v <= c.v_r {
                    return k as u64;
                }
                if k < 0.0 || (us < 0.013 && v > us) {
                    continue;
                }
                let lhs = v.ln() + c.ln_inv_alpha - (c.a / (us * us) + c.b).ln();
                let rhs = -self.lambda + k * c.ln_lambda - ln_factorial(k as u64);
                if lhs <= rhs {
                    return k as u64;
                }
            },
        }
    }
}

/// `ln(k!)`, exact summation below 64 and a Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 64 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64 + 1.0;
    // ln Γ(x) with three correction terms; error < 1e-14 for x ≥ 64.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Uniform index in `0..len` (Lemire's multiply-shift, unbiased).
#[inline]
pub fn index<R: Rng>(rng: &mut R, len: usize) -> usize {
    rng.random_range(0..len)
}
