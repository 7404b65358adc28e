//! Criterion benchmarks for the erlab kernels; see `benches/`.
