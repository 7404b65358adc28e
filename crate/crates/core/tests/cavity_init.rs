use erlab::cavity::{self, PopulationInit, RdeConfig};

#[test]
fn fixed_point_does_not_depend_on_initialization() {
    let points = cavity::points_on_line(&[0.0, 0.5, 1.5, 2.5], 0.1).unwrap();
    for lambda in [2.0, 4.0, 16.0] {
        let leaf = RdeConfig {
            population: 20_000,
            sweep_cap: 400,
            burn_in: 150,
            tolerance: 1e-3,
            init: PopulationInit::Leaf,
        };
        let warm = RdeConfig {
            burn_in: 8,
            init: PopulationInit::Semicircle,
            ..leaf
        };
        let a = cavity::solve(lambda, &points, &leaf, 1).unwrap();
        let b = cavity::solve(lambda, &points, &warm, 2).unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.estimates.iter().zip(&b.estimates) {
            assert!((x - y).norm() < 0.03, "λ={lambda}: {x} vs {y}");
        }
    }
}

#[test]
fn large_lambda_approaches_semicircle() {
    let points = cavity::points_on_line(&[-1.0, 0.0, 1.0], 0.2).unwrap();
    let cfg = RdeConfig {
        population: 20_000,
        sweep_cap: 200,
        burn_in: 30,
        ..RdeConfig::default()
    };
    let sol = cavity::solve(200.0, &points, &cfg, 3).unwrap();
    for (s, p) in sol.estimates.iter().zip(&points) {
        assert!((s - cavity::semicircle_stieltjes(*p)).norm() < 0.02);
    }
}
