//! Numerical laboratory for the spectra of sparse Erdős–Rényi graphs
//! `G(n, λ/n)` with edge weights `1/√λ`.
//!
//! * [`graph`] samples adjacency matrices and scales them.
//! * [`linalg`] and [`spectrum`] diagonalize them and compare empirical
//!   spectral distributions with the semicircle law.
//! * [`walks`] enumerates closed walks for exact moments.
//! * [`cavity`] solves the resolvent recursion on the Poisson
//!   Galton–Watson tree by population dynamics.
//! * [`deloc`] measures eigenvector infinity norms and the machinery
//!   behind weak delocalization.
//! * [`experiment`] ties everything into seeded, reproducible runs with
//!   CSV output.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod deloc;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod spectrum;
pub mod walks;

pub use cavity::{ResolventPopulation, SpectralPoint};
pub use deloc::{BinPartition, DelocalizationReport, PerturbationSpec, ProjectionProbe};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentKind, ResultRow};
pub use graph::{GraphParams, Scale, SparseSymmetricMatrix};
pub use linalg::{EigenBackend, SpectralDecomposition, SymmetricMatrix};
pub use spectrum::{EmpiricalMeasure, SemicircleLaw};
pub use walks::{NormalizedTuple, WalkCoefficientTable};

/// Version string recorded in run manifests.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("ERLAB_GIT_DESCRIBE"));
