use erlab::cavity::{self, PopulationInit, ResolventPopulation, SpectralPoint};
use erlab::deloc::{self, BinPartition};
use erlab::graph::sample_er_graph;
use erlab::linalg::{eigen_decompose_with, EigenBackend, SymmetricMatrix};
use erlab::spectrum::{interval_mass, kolmogorov_distance, EmpiricalMeasure, SemicircleLaw};
use erlab::GraphParams;
use proptest::prelude::*;

fn graph_params() -> impl Strategy<Value = GraphParams> {
    (1usize..80, 0.0f64..1.0, any::<u64>())
        .prop_map(|(n, frac, seed)| GraphParams::new(n, frac * n as f64, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_graphs_are_symmetric_and_reproducible(params in graph_params()) {
        let a = sample_er_graph(&params).unwrap();
        let b = sample_er_graph(&params).unwrap();
        prop_assert_eq!(&a, &b);
        let dense = a.to_dense();
        prop_assert!(dense.is_symmetric(0.0));
        prop_assert_eq!(dense.trace(), 0.0);
        prop_assert!(dense.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn decompositions_are_valid(n in 1usize..24, seed in any::<u64>()) {
        let m = deloc::gaussian_matrix(n, seed);
        for backend in [EigenBackend::HouseholderQl, EigenBackend::Faer] {
            let d = eigen_decompose_with(&m, backend).unwrap();
            prop_assert!(d.satisfies_invariants(&m));
        }
    }

    #[test]
    fn interval_mass_is_monotone(
        atoms in prop::collection::vec(-3.0f64..3.0, 1..50),
        a in -3.0f64..3.0,
        w in 0.0f64..2.0,
        grow in 0.0f64..1.0,
    ) {
        let m = EmpiricalMeasure::new(atoms);
        let inner = interval_mass(&m, a, a + w).unwrap();
        let outer = interval_mass(&m, a - grow, a + w + grow).unwrap();
        prop_assert!(inner <= outer);
        prop_assert!((0.0..=1.0).contains(&outer));
    }

    #[test]
    fn ks_distance_is_a_probability_gap(atoms in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let d = kolmogorov_distance(&EmpiricalMeasure::new(atoms), &SemicircleLaw);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn delocalized_fraction_grows_with_epsilon(
        norms in prop::collection::vec(0.0f64..1.0, 1..40),
        e1 in 0.01f64..1.5,
        de in 0.0f64..1.0,
    ) {
        let lo = deloc::delocalized_fraction(&norms, e1).unwrap();
        let hi = deloc::delocalized_fraction(&norms, e1 + de).unwrap();
        prop_assert!(lo <= hi);
    }

    #[test]
    fn bins_respect_breakpoints(q in 1usize..200, x in -2.5f64..2.5) {
        let part = BinPartition::new(q).unwrap();
        match part.bin_of(x) {
            None => prop_assert!(x.abs() > 2.0),
            Some(b) => {
                prop_assert!(part.breakpoint(b) <= x && x <= part.breakpoint(b + 1));
                if b > 0 {
                    prop_assert!(x > part.breakpoint(b));
                }
            }
        }
    }

    #[test]
    fn cavity_sweeps_keep_herglotz_bounds(
        re in -4.0f64..4.0,
        im in 0.01f64..3.0,
        lambda in 0.1f64..20.0,
        lower in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let z = SpectralPoint::from_parts(re, if lower { -im } else { im }).unwrap();
        let mut pop = ResolventPopulation::new(200, &[z], lambda, PopulationInit::Leaf).unwrap();
        for s in 0..4 {
            pop = cavity::rde_sweep(&pop, seed.wrapping_add(s));
            prop_assert!(pop.max_scaled_modulus() <= 1.0 + 1e-12);
            prop_assert!(pop.min_signed_imag() >= 0.0);
        }
    }

    #[test]
    fn weyl_gap_bounded_by_perturbation(n in 2usize..16, seed in any::<u64>(), delta in 0.0f64..0.5) {
        let a = SymmetricMatrix::from_upper_fn(n, |i, j| ((i * 31 + j * 17) % 7) as f64 / 7.0);
        let spec = deloc::PerturbationSpec::with_delta(delta, 0.75, seed).unwrap();
        let b = deloc::perturb(&a, &spec);
        let da = eigen_decompose_with(&a, EigenBackend::HouseholderQl).unwrap();
        let db = eigen_decompose_with(&b, EigenBackend::HouseholderQl).unwrap();
        let n_op = eigen_decompose_with(&deloc::gaussian_matrix(n, seed), EigenBackend::HouseholderQl)
            .unwrap()
            .operator_norm();
        let gap = deloc::weyl_gap(da.eigenvalues(), db.eigenvalues()).unwrap();
        prop_assert!(gap <= delta * n_op + 1e-10);
    }
}
