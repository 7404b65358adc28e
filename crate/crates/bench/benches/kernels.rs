use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use erlab::cavity::{self, PopulationInit, ResolventPopulation};
use erlab::graph::{sample_er_graph, scale_adjacency};
use erlab::linalg::{eigen_decompose_with, EigenBackend};
use erlab::walks::WalkCoefficientTable;
use erlab::GraphParams;

fn eigensolvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigen_decompose");
    group.sample_size(10);
    for n in [100, 200, 400] {
        let m = sample_er_graph(&GraphParams::new(n, 4.0, 1).unwrap()).unwrap();
        let a = scale_adjacency(&m, 4.0).unwrap().to_dense();
        for backend in [EigenBackend::HouseholderQl, EigenBackend::Faer] {
            group.bench_with_input(BenchmarkId::new(format!("{backend:?}"), n), &a, |b, a| {
                b.iter(|| eigen_decompose_with(black_box(a), backend).unwrap())
            });
        }
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_er_graph");
    for n in [1_000, 4_000] {
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                sample_er_graph(&GraphParams::new(n, 4.0, seed).unwrap()).unwrap()
            })
        });
    }
    group.finish();
}

fn rde_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("rde_sweep");
    group.sample_size(10);
    let energies = cavity::energy_grid(-3.0, 3.0, 0.1).unwrap();
    let points = cavity::points_on_line(&energies, 0.1).unwrap();
    for lambda in [2.0, 32.0] {
        let pop =
            ResolventPopulation::new(10_000, &points, lambda, PopulationInit::Semicircle).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(lambda), &pop, |b, pop| {
            b.iter(|| cavity::rde_sweep(black_box(pop), 3))
        });
    }
    group.finish();
}

fn walk_enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("walk_coefficients");
    group.sample_size(10);
    for k in [8, 10, 12] {
        group.bench_function(BenchmarkId::from_parameter(k), |b| {
            b.iter(|| WalkCoefficientTable::build(black_box(k)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigensolvers, sampling, rde_sweep, walk_enumeration);
criterion_main!(benches);
