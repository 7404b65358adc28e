//! Configuration-driven experiments with seeded, order-independent
//! randomness and a flat CSV report.
//!
//! Every random draw is keyed by
//! `derive_seed(master, [experiment, n, λ-index, replication, stream])`,
//! so a cell of the parameter grid produces the same numbers whatever the
//! thread count or evaluation order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{self, RdeConfig};
use crate::deloc::{self, PerturbationSpec, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::graph::{isolated_vertex_count, sample_er_graph, scale_adjacency, GraphParams};
use crate::linalg::{self, EigenBackend, SymmetricMatrix};
use crate::rng::derive_seed;
use crate::spectrum::{kolmogorov_distance, EmpiricalMeasure, SemicircleLaw};
use crate::walks::{self, semicircle_moment, WalkCoefficientTable, DEFAULT_WALK_CAP};

/// Header of `results.csv`.
pub const CSV_HEADER: [&str; 8] = [
    "experiment",
    "n",
    "lambda",
    "epsilon",
    "metric",
    "value",
    "stderr",
    "reps",
];

/// Largest moment compared in the semicircle experiment.
pub const SEMICIRCLE_MAX_MOMENT: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Semicircle,
    Moments,
    Rde,
    Delocalization,
    Diagonal,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Semicircle => "semicircle",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Rde => "rde",
            ExperimentKind::Delocalization => "delocalization",
            ExperimentKind::Diagonal => "diagonal",
        }
    }

    fn label(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "semicircle" => ExperimentKind::Semicircle,
            "moments" => ExperimentKind::Moments,
            "rde" => ExperimentKind::Rde,
            "delocalization" => ExperimentKind::Delocalization,
            "diagonal" => ExperimentKind::Diagonal,
            other => return Err(Error::Parse(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// `λ_n` along the diagonal experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    /// `log log n`.
    LogLog,
    /// `log n`.
    Log,
    /// `n^β`, `0 < β < 1`.
    Power { beta: f64 },
    /// A fixed `λ`; always rejected because it does not diverge.
    Constant { value: f64 },
}

impl Schedule {
    pub fn lambda(&self, n: usize) -> f64 {
        let x = n as f64;
        match *self {
            Schedule::LogLog => x.ln().ln(),
            Schedule::Log => x.ln(),
            Schedule::Power { beta } => x.powf(beta),
            Schedule::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    pub replications: usize,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            master: 0,
            replications: 1,
        }
    }
}

/// Energy grid and broadening for the cavity experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    /// Imaginary part for the Stieltjes transform comparison.
    pub eta: f64,
    /// Imaginary part for density curves.
    pub density_eta: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            from: -3.0,
            to: 3.0,
            step: 0.1,
            eta: 0.1,
            density_eta: 0.05,
        }
    }
}

/// One experiment run, mirrored field-for-field by the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub rde: RdeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Moment orders for the moment experiment.
    #[serde(default)]
    pub k: Vec<usize>,
    /// Exponent of `δ(n) = n^{−γ}`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Also diagonalize the unperturbed matrix component by component.
    #[serde(default)]
    pub canonical_basis: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            n: Vec::new(),
            lambda: Vec::new(),
            schedule: None,
            epsilon: Vec::new(),
            seeds: Seeds::default(),
            rde: RdeConfig::default(),
            grid: GridConfig::default(),
            k: Vec::new(),
            gamma: DEFAULT_GAMMA,
            canonical_basis: false,
            output_dir: default_output_dir(),
        }
    }

    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::from_json_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_unvalidated(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        if self.seeds.replications == 0 {
            return Err(Error::config("seeds.replications", "must be at least 1"));
        }
        if self.n.contains(&0) {
            return Err(Error::config("n", "every n must be at least 1"));
        }
        if let Some(bad) = self.lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::config(
                "lambda",
                format!("must be positive and finite, got {bad}"),
            ));
        }
        if let Some(bad) = self.epsilon.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::config(
                "epsilon",
                format!("must be positive, got {bad}"),
            ));
        }
        if !(self.gamma > 0.5) {
            return Err(Error::config(
                "gamma",
                format!("must exceed 1/2, got {}", self.gamma),
            ));
        }
        let needs_graph = matches!(self.kind, Semicircle | Moments | Delocalization | Diagonal);
        if needs_graph && self.n.is_empty() {
            return Err(Error::config("n", "grid is empty"));
        }
        if self.kind != Diagonal {
            if self.lambda.is_empty() {
                return Err(Error::config("lambda", "grid is empty"));
            }
            if let Some(&min_n) = self.n.iter().min() {
                let max_l = self.lambda.iter().copied().fold(0.0, f64::max);
                if max_l > min_n as f64 {
                    return Err(Error::config(
                        "lambda",
                        format!("λ = {max_l} exceeds the smallest n = {min_n}"),
                    ));
                }
            }
        }
        match self.kind {
            Moments => {
                if self.k.is_empty() {
                    return Err(Error::config("k", "grid is empty"));
                }
                if let Some(bad) = self.k.iter().find(|&&k| k == 0 || k > DEFAULT_WALK_CAP) {
                    return Err(Error::config(
                        "k",
                        format!("order {bad} outside 1..={DEFAULT_WALK_CAP}"),
                    ));
                }
            }
            Rde => {
                self.rde.validate()?;
                let g = &self.grid;
                if !(g.eta > 0.0 && g.density_eta > 0.0) {
                    return Err(Error::config("grid.eta", "must be positive"));
                }
                if cavity::energy_grid(g.from, g.to, g.step).is_err() {
                    return Err(Error::config("grid", "energy grid is empty"));
                }
            }
            Delocalization | Diagonal => {
                if self.epsilon.is_empty() {
                    return Err(Error::config("epsilon", "grid is empty"));
                }
            }
            Semicircle => {}
        }
        if self.kind == Diagonal {
            self.validate_schedule()?;
        }
        Ok(())
    }

    fn validate_schedule(&self) -> Result<()> {
        let schedule = self
            .schedule
            .ok_or_else(|| Error::config("schedule", "required for the diagonal experiment"))?;
        match schedule {
            Schedule::Constant { .. } => {
                return Err(Error::config("schedule", "a constant λ does not diverge"));
            }
            Schedule::Power { beta } if !(beta > 0.0 && beta < 1.0) => {
                return Err(Error::config(
                    "schedule.beta",
                    format!("need 0 < β < 1, got {beta}"),
                ));
            }
            _ => {}
        }
        let mut ns = self.n.clone();
        ns.sort_unstable();
        let mut prev = 0.0;
        for n in ns {
            let l = schedule.lambda(n);
            if !(l > 0.0 && l <= n as f64) {
                return Err(Error::config(
                    "schedule",
                    format!("λ_n = {l} is not in (0, n] at n = {n}"),
                ));
            }
            if l < prev {
                return Err(Error::config("schedule", "λ_n must increase with n"));
            }
            prev = l;
        }
        Ok(())
    }

    fn seed(&self, labels: &[u64]) -> u64 {
        let mut all = Vec::with_capacity(labels.len() + 1);
        all.push(self.kind.label());
        all.extend_from_slice(labels);
        derive_seed(self.seeds.master, &all)
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl ResultRow {
    fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        fn opt(a: Option<f64>, b: Option<f64>) -> std::cmp::Ordering {
            match (a, b) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (a, b) => a.is_some().cmp(&b.is_some()),
            }
        }
        self.experiment
            .cmp(&other.experiment)
            .then(self.n.cmp(&other.n))
            .then(opt(self.lambda, other.lambda))
            .then(opt(self.epsilon, other.epsilon))
            .then(self.metric.cmp(&other.metric))
    }
}

/// Mean and `sd/√m` of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

struct RowBuilder {
    kind: ExperimentKind,
    rows: Vec<ResultRow>,
}

impl RowBuilder {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
        }
    }

    fn push(
        &mut self,
        n: Option<usize>,
        lambda: Option<f64>,
        epsilon: Option<f64>,
        metric: impl Into<String>,
        samples: &[f64],
    ) {
        let (value, stderr) = mean_stderr(samples);
        self.push_value(n, lambda, epsilon, metric, value, stderr, samples.len());
    }

    #[allow(clippy::too_many_arguments)]
    fn push_value(
        &mut self,
        n: Option<usize>,
        lambda: Option<f64>,
        epsilon: Option<f64>,
        metric: impl Into<String>,
        value: f64,
        stderr: f64,
        reps: usize,
    ) {
        self.rows.push(ResultRow {
            experiment: self.kind,
            n,
            lambda,
            epsilon,
            metric: metric.into(),
            value,
            stderr,
            reps,
        });
    }

    fn finish(mut self) -> Result<Vec<ResultRow>> {
        if let Some(bad) = self
            .rows
            .iter()
            .find(|r| !r.value.is_finite() || !(r.stderr >= 0.0))
        {
            return Err(Error::Numerical(format!(
                "non-finite result for `{}`",
                bad.metric
            )));
        }
        self.rows.sort_by(ResultRow::canonical_cmp);
        Ok(self.rows)
    }
}

/// Scaled adjacency matrix of `G(n, λ/n)` as a dense matrix.
pub fn sample_scaled_dense(n: usize, lambda: f64, seed: u64) -> Result<SymmetricMatrix> {
    let m = sample_er_graph(&GraphParams::new(n, lambda, seed)?)?;
    Ok(scale_adjacency(&m, lambda)?.to_dense())
}

fn sample_eigenvalues(n: usize, lambda: f64, seed: u64) -> Result<Vec<f64>> {
    linalg::eigenvalues(&sample_scaled_dense(n, lambda, seed)?, EigenBackend::Auto)
}

fn check_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::config(
            "kind",
            format!("expected {kind}, got {}", cfg.kind),
        ));
    }
    cfg.validate()
}

fn replicate<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..cfg.seeds.replications).into_par_iter().map(f).collect()
}

/// KS distance to the semicircle law and absolute moment errors for
/// `k ≤ 6`, per `(n, λ)`.
pub fn run_semicircle_convergence(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_kind(cfg, ExperimentKind::Semicircle)?;
    let mut out = RowBuilder::new(cfg.kind);
    for &n in &cfg.n {
        for (li, &lambda) in cfg.lambda.iter().enumerate() {
            let per_rep = replicate(cfg, |r| {
                let vals =
                    sample_eigenvalues(n, lambda, cfg.seed(&[n as u64, li as u64, r as u64, 0]))?;
                let m = EmpiricalMeasure::new(vals);
                let mut row = vec![kolmogorov_distance(&m, &SemicircleLaw)];
                row.extend(
                    (1..=SEMICIRCLE_MAX_MOMENT).map(|k| (m.moment(k) - semicircle_moment(k)).abs()),
                );
                Ok(row)
            })?;
            let col = |c: usize| per_rep.iter().map(|r| r[c]).collect::<Vec<_>>();
            out.push(Some(n), Some(lambda), None, "ks", &col(0));
            for k in 1..=SEMICIRCLE_MAX_MOMENT as usize {
                out.push(
                    Some(n),
                    Some(lambda),
                    None,
                    format!("moment_abs_err_k{k}"),
                    &col(k),
                );
            }
        }
    }
    out.finish()
}

/// Monte Carlo ESD moments next to the exact finite-`n` expectation and
/// the `n → ∞` limit, per `(k, λ, n)`.
pub fn run_moment_comparison(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_kind(cfg, ExperimentKind::Moments)?;
    let tables: BTreeMap<usize, WalkCoefficientTable> = cfg
        .k
        .iter()
        .map(|&k| Ok((k, WalkCoefficientTable::build(k)?)))
        .collect::<Result<_>>()?;
    let mut out = RowBuilder::new(cfg.kind);
    for &n in &cfg.n {
        for (li, &lambda) in cfg.lambda.iter().enumerate() {
            let per_rep = replicate(cfg, |r| {
                let vals =
                    sample_eigenvalues(n, lambda, cfg.seed(&[n as u64, li as u64, r as u64, 0]))?;
                let m = EmpiricalMeasure::new(vals);
                Ok(cfg
                    .k
                    .iter()
                    .map(|&k| m.moment(k as u32))
                    .collect::<Vec<_>>())
            })?;
            for (c, &k) in cfg.k.iter().enumerate() {
                let mc: Vec<f64> = per_rep.iter().map(|r| r[c]).collect();
                let exact = tables[&k].expected_moment(n, lambda)?;
                let limit = tables[&k].limiting_moment(lambda)?;
                let (mean, se) = mean_stderr(&mc);
                let reps = mc.len();
                let (nn, ll) = (Some(n), Some(lambda));
                out.push_value(nn, ll, None, format!("moment_mc_k{k}"), mean, se, reps);
                out.push_value(nn, ll, None, format!("moment_exact_k{k}"), exact, 0.0, reps);
                out.push_value(nn, ll, None, format!("moment_limit_k{k}"), limit, 0.0, reps);
                out.push_value(
                    nn,
                    ll,
                    None,
                    format!("gap_mc_exact_k{k}"),
                    mean - exact,
                    se,
                    reps,
                );
                out.push_value(
                    nn,
                    ll,
                    None,
                    format!("gap_exact_limit_k{k}"),
                    exact - limit,
                    0.0,
                    reps,
                );
            }
        }
    }
    out.finish()
}

fn energy_label(e: f64) -> String {
    format!("{e:+.3}")
}

/// Population-dynamics Stieltjes transform against the semicircle: the
/// sup-distance on the `η` line, inverted density curves on the
/// `density_eta` line, and, for every `n` supplied, smoothed ESD densities
/// on the same energies.
pub fn run_rde_comparison(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_kind(cfg, ExperimentKind::Rde)?;
    let g = cfg.grid;
    let energies = cavity::energy_grid(g.from, g.to, g.step)?;
    let line = cavity::points_on_line(&energies, g.eta)?;
    let density_line = cavity::points_on_line(&energies, g.density_eta)?;
    let reference: Vec<Complex64> = line
        .iter()
        .map(|&z| cavity::semicircle_stieltjes(z))
        .collect();
    let mut out = RowBuilder::new(cfg.kind);
    for (li, &lambda) in cfg.lambda.iter().enumerate() {
        let mut gaps = Vec::new();
        let mut densities: Vec<Vec<f64>> = Vec::new();
        let mut converged = Vec::new();
        for r in 0..cfg.seeds.replications {
            let seed = cfg.seed(&[0, li as u64, r as u64, 0]);
            let sol = cavity::solve(lambda, &line, &cfg.rde, seed)?;
            gaps.push(
                sol.estimates
                    .iter()
                    .zip(&reference)
                    .map(|(s, t)| (s - t).norm())
                    .fold(0.0, f64::max),
            );
            let dsol = cavity::solve(
                lambda,
                &density_line,
                &cfg.rde,
                cfg.seed(&[0, li as u64, r as u64, 1]),
            )?;
            let pairs: Vec<(f64, Complex64)> =
                energies.iter().copied().zip(dsol.estimates).collect();
            densities.push(
                cavity::invert_stieltjes(&pairs, g.density_eta)?
                    .into_iter()
                    .map(|p| p.1)
                    .collect(),
            );
            converged.push(if sol.converged && dsol.converged {
                1.0
            } else {
                0.0
            });
        }
        out.push(None, Some(lambda), None, "sup_stieltjes_gap", &gaps);
        out.push(None, Some(lambda), None, "converged", &converged);
        let rde_mean: Vec<f64> = (0..energies.len())
            .map(|e| mean_stderr(&densities.iter().map(|d| d[e]).collect::<Vec<_>>()).0)
            .collect();
        for (e, &energy) in energies.iter().enumerate() {
            let col: Vec<f64> = densities.iter().map(|d| d[e]).collect();
            out.push(
                None,
                Some(lambda),
                None,
                format!("density_rde@E={}", energy_label(energy)),
                &col,
            );
        }
        for &n in &cfg.n {
            let per_rep = replicate(cfg, |r| {
                let vals =
                    sample_eigenvalues(n, lambda, cfg.seed(&[n as u64, li as u64, r as u64, 2]))?;
                let m = EmpiricalMeasure::new(vals);
                Ok(energies
                    .iter()
                    .map(|&e| m.smoothed_density(e, g.density_eta))
                    .collect::<Vec<_>>())
            })?;
            let mut sup = 0.0f64;
            for (e, &energy) in energies.iter().enumerate() {
                let col: Vec<f64> = per_rep.iter().map(|d| d[e]).collect();
                let (mean, _) = mean_stderr(&col);
                sup = sup.max((mean - rde_mean[e]).abs());
                out.push(
                    Some(n),
                    Some(lambda),
                    None,
                    format!("density_esd@E={}", energy_label(energy)),
                    &col,
                );
            }
            let reps = cfg.seeds.replications;
            out.push_value(
                Some(n),
                Some(lambda),
                None,
                "density_sup_gap",
                sup,
                0.0,
                reps,
            );
        }
    }
    out.finish()
}

/// Measurements of one perturbed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DelocalizationSample {
    pub norms: Vec<f64>,
    pub bulk_fraction: f64,
    pub weyl_gap: f64,
    pub isolated_fraction: f64,
    /// Fraction of canonical unperturbed basis vectors with `‖u‖_∞ = 1`.
    pub canonical_unit_fraction: Option<f64>,
    /// Perturbations re-drawn because `B` had a near-repeated eigenvalue.
    pub redraws: usize,
}

/// Most perturbation redraws before a sample is declared degenerate.
const MAX_REDRAWS: usize = 8;

/// Sample `A`, perturb until the spectrum of `B` is numerically simple,
/// and measure.
pub fn delocalization_sample(
    n: usize,
    lambda: f64,
    gamma: f64,
    seed: u64,
    canonical: bool,
) -> Result<DelocalizationSample> {
    let graph = sample_er_graph(&GraphParams::new(n, lambda, derive_seed(seed, &[0]))?)?;
    let scaled = scale_adjacency(&graph, lambda)?;
    let a = scaled.to_dense();
    let a_vals = linalg::eigenvalues(&a, EigenBackend::Auto)?;
    let mut redraws = 0;
    let d = loop {
        let spec = PerturbationSpec::for_size(n, gamma, derive_seed(seed, &[1, redraws as u64]))?;
        let d = linalg::eigen_decompose_with(&deloc::perturb(&a, &spec), EigenBackend::Auto)?;
        if n < 2 || deloc::min_spacing(d.eigenvalues()) > deloc::SPECTRAL_SLACK {
            break d;
        }
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return Err(Error::Degenerate(format!(
                "no simple spectrum after {MAX_REDRAWS} redraws"
            )));
        }
    };
    let canonical_unit_fraction = if canonical {
        let basis = deloc::canonical_basis(&scaled)?;
        let ones = deloc::infinity_norms(&basis)
            .iter()
            .filter(|&&x| x == 1.0)
            .count();
        Some(ones as f64 / n as f64)
    } else {
        None
    };
    Ok(DelocalizationSample {
        norms: deloc::infinity_norms(&d),
        bulk_fraction: deloc::bulk_fraction(&d),
        weyl_gap: deloc::weyl_gap(d.eigenvalues(), &a_vals)?,
        isolated_fraction: isolated_vertex_count(&graph) as f64 / n as f64,
        canonical_unit_fraction,
        redraws,
    })
}

fn edge_bound_holds(epsilon: f64) -> Result<f64> {
    let part = deloc::choose_partition(epsilon.min(2.0))?;
    let bound = deloc::edge_bin_lower_bound(&part);
    let min_mass = part
        .semicircle_masses()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(if min_mass >= bound { 1.0 } else { 0.0 })
}

fn push_delocalization_rows(
    out: &mut RowBuilder,
    n: usize,
    lambda: f64,
    epsilons: &[f64],
    samples: &[DelocalizationSample],
) -> Result<()> {
    let col = |f: &dyn Fn(&DelocalizationSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let (nn, ll) = (Some(n), Some(lambda));
    for &eps in epsilons {
        let fr: Vec<f64> = samples
            .iter()
            .map(|s| deloc::delocalized_fraction(&s.norms, eps))
            .collect::<Result<_>>()?;
        out.push(nn, ll, Some(eps), "delocalized_fraction", &fr);
    }
    out.push(nn, ll, None, "bulk_fraction", &col(&|s| s.bulk_fraction));
    out.push(nn, ll, None, "weyl_gap", &col(&|s| s.weyl_gap));
    out.push(
        nn,
        ll,
        None,
        "isolated_fraction",
        &col(&|s| s.isolated_fraction),
    );
    out.push(nn, ll, None, "redraws", &col(&|s| s.redraws as f64));
    if samples.iter().all(|s| s.canonical_unit_fraction.is_some()) {
        out.push(
            nn,
            ll,
            None,
            "canonical_unit_fraction",
            &col(&|s| s.canonical_unit_fraction.unwrap_or(0.0)),
        );
    }
    Ok(())
}

/// Delocalized fraction per `ε`, bulk fraction, Weyl gap and isolated
/// fraction per `(n, λ)`, plus the edge-bin bound check per `ε`.
pub fn run_delocalization_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_kind(cfg, ExperimentKind::Delocalization)?;
    let mut out = RowBuilder::new(cfg.kind);
    for &eps in &cfg.epsilon {
        // Partitions are only defined up to ε = 2; larger ε behaves as 2.
        let holds = edge_bound_holds(eps)?;
        out.push_value(None, None, Some(eps), "edge_bound_holds", holds, 0.0, 1);
    }
    for &n in &cfg.n {
        for (li, &lambda) in cfg.lambda.iter().enumerate() {
            let samples = replicate(cfg, |r| {
                let seed = cfg.seed(&[n as u64, li as u64, r as u64, 0]);
                delocalization_sample(n, lambda, cfg.gamma, seed, cfg.canonical_basis)
            })?;
            push_delocalization_rows(&mut out, n, lambda, &cfg.epsilon, &samples)?;
        }
    }
    out.finish()
}

/// Delocalized and bulk fractions along `λ_n` given by the schedule.
pub fn run_diagonal_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    check_kind(cfg, ExperimentKind::Diagonal)?;
    let schedule = cfg.schedule.expect("validated");
    let mut out = RowBuilder::new(cfg.kind);
    for &n in &cfg.n {
        let lambda = schedule.lambda(n);
        let samples = replicate(cfg, |r| {
            let seed = cfg.seed(&[n as u64, 0, r as u64, 0]);
            delocalization_sample(n, lambda, cfg.gamma, seed, false)
        })?;
        push_delocalization_rows(&mut out, n, lambda, &cfg.epsilon, &samples)?;
    }
    out.finish()
}

/// Dispatch on `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match cfg.kind {
        ExperimentKind::Semicircle => run_semicircle_convergence(cfg),
        ExperimentKind::Moments => run_moment_comparison(cfg),
        ExperimentKind::Rde => run_rde_comparison(cfg),
        ExperimentKind::Delocalization => run_delocalization_sweep(cfg),
        ExperimentKind::Diagonal => run_diagonal_sweep(cfg),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    master_seed: u64,
    rows: usize,
    config: &'a ExperimentConfig,
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write rows as CSV.
pub fn write_results<W: std::io::Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_HEADER)?;
    for r in rows {
        csv.write_record([
            r.experiment.as_str().to_string(),
            opt_field(r.n),
            opt_field(r.lambda),
            opt_field(r.epsilon),
            r.metric.clone(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.reps.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Parse rows written by [`write_results`].
pub fn read_results<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut csv = csv::Reader::from_reader(r);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    fn opt<T: FromStr>(s: &str, what: &str) -> Result<Option<T>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
    }
    fn req<T: FromStr>(s: &str, what: &str) -> Result<T> {
        opt(s, what)?.ok_or_else(|| Error::Parse(format!("missing {what}")))
    }
    csv.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                experiment: rec[0].parse()?,
                n: opt(&rec[1], "n")?,
                lambda: opt(&rec[2], "lambda")?,
                epsilon: opt(&rec[3], "epsilon")?,
                metric: rec[4].to_string(),
                value: req(&rec[5], "value")?,
                stderr: req(&rec[6], "stderr")?,
                reps: req(&rec[7], "reps")?,
            })
        })
        .collect()
}

/// Write `results.csv` and `manifest.json` into `dir`, replacing earlier
/// output.
pub fn emit_report(rows: &[ResultRow], cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::param("rows", "nothing to report"));
    }
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    fs::write(dir.join("results.csv"), buf)?;
    let manifest = Manifest {
        version: crate::VERSION,
        master_seed: cfg.seeds.master,
        rows: rows.len(),
        config: cfg,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Look up the single row matching the given coordinates.
pub fn find_row<'a>(
    rows: &'a [ResultRow],
    n: Option<usize>,
    lambda: Option<f64>,
    epsilon: Option<f64>,
    metric: &str,
) -> Option<&'a ResultRow> {
    rows.iter()
        .find(|r| r.n == n && r.lambda == lambda && r.epsilon == epsilon && r.metric == metric)
}

/// Every `k` the moment experiment accepts.
pub fn moment_orders() -> std::ops::RangeInclusive<usize> {
    1..=walks::DEFAULT_WALK_CAP
}
