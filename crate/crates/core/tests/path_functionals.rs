//! Path functionals checked against quadrature and exact Brownian moments.

use nelson_core::estimator::table_for;
use nelson_core::paths::{ito_identity_check, s_full, sample_path, BrownianPath, PathGrid};
use nelson_core::rng::RandomStream;
use nelson_core::stats::{mean, variance};
use nelson_core::{KernelEvaluator, ModelParams, QuadratureConfig};

fn evaluator(big_t: f64) -> KernelEvaluator {
    KernelEvaluator::new(ModelParams::new(0.1, 1.0, 0.3, big_t, big_t / 2.0).unwrap(), QuadratureConfig::default()).unwrap()
}

/// Composite Simpson rule, used as an independent oracle.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn endpoint_displacement_has_variance_two_t() {
    let big_t = 1.5;
    let grid = PathGrid::new(big_t, 12).unwrap();
    let n = 6000;
    let mut xs = Vec::with_capacity(3 * n);
    for i in 0..n {
        let p = sample_path(grid, RandomStream::new(77, i as u64));
        let end = p.positions()[grid.n_steps()];
        let start = p.positions()[0];
        xs.extend((0..3).map(|c| end[c] - start[c]));
    }
    let var = variance(&xs);
    // Relative standard error of a Gaussian sample variance is sqrt(2/n).
    let rel_se = (2.0 / xs.len() as f64).sqrt();
    assert!(mean(&xs).abs() < 5.0 * (2.0 * big_t / xs.len() as f64).sqrt());
    assert!(((var - 2.0 * big_t) / (2.0 * big_t)).abs() < 5.0 * rel_se, "variance {var}");
}

#[test]
fn constant_path_action_matches_double_integral() {
    let big_t = 1.0;
    let ev = evaluator(big_t);
    let grid = PathGrid::from_dt(big_t, 0.01).unwrap();
    let table = table_for(&ev, &grid).unwrap();
    let s = s_full(&BrownianPath::frozen(grid), &table).unwrap();
    let len = 2.0 * big_t;
    let oracle = 2.0 * simpson(|u| (len - u) * ev.w_kernel(0.0, u).unwrap().value, 0.0, len, 400);
    assert!(((s - oracle) / oracle).abs() < 1e-3, "trapezoid {s} vs {oracle}");
}

#[test]
fn ensemble_mean_action_matches_quadrature() {
    let big_t = 1.0;
    let ev = evaluator(big_t);
    let grid = PathGrid::from_dt(big_t, 0.0125).unwrap();
    let table = table_for(&ev, &grid).unwrap();
    let s: Vec<f64> = (0..2000)
        .map(|i| s_full(&sample_path(grid, RandomStream::new(5, i)), &table).unwrap())
        .collect();
    let se = (variance(&s) / s.len() as f64).sqrt();
    let q = ev.mean_s_quadrature(big_t).unwrap().value;
    assert!((mean(&s) - q).abs() < 4.0 * se, "mean {} +- {se} vs {q}", mean(&s));
}

#[test]
fn ito_sides_on_constant_path() {
    // Without quadratic variation the Laplacian term is absent, so the two
    // sides differ; each is checked against its own closed form.
    let big_t = 2.0;
    let ev = evaluator(big_t);
    let grid = PathGrid::from_dt(big_t, 0.005).unwrap();
    let table = table_for(&ev, &grid).unwrap();
    let frozen = BrownianPath::frozen(grid);
    for (s, big_s) in [(-2.0, 0.0), (-1.0, 1.5), (0.5, 2.0)] {
        let (lhs, rhs) = ito_identity_check(&frozen, &table, s, big_s).unwrap();
        let u = big_s - s;
        let exact = ev.rho_origin().unwrap().value - ev.rho_kernel(0.0, u).unwrap().value;
        assert!(((rhs - exact) / exact).abs() < 1e-9, "rhs {rhs} vs {exact}");
        let oracle = simpson(|t| ev.w_kernel(0.0, t).unwrap().value, 0.0, u, 400);
        assert!(((lhs - oracle) / oracle).abs() < 1e-3, "lhs {lhs} vs {oracle}");
        assert!(lhs > rhs);
    }
}

#[test]
fn lag_table_agrees_with_direct_quadrature() {
    let ev = evaluator(4.0);
    let grid = PathGrid::from_dt(4.0, 0.05).unwrap();
    let table = table_for(&ev, &grid).unwrap();
    let worst = table.validate(7, 16).unwrap();
    assert!(worst < 1e-5, "worst relative table error {worst}");
}
