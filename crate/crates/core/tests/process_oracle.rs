//! Simulated process statistics against closed-form oracles.

use corrbench::gaussian::GaussianFunctional;
use corrbench::process::{estimate_pk, exact_cov_sign, sample_paths, TimeGrid};
use corrbench::special::{normal_cdf, normal_sf};
use corrbench::BooleanFunction;

fn sign(f: BooleanFunction) -> GaussianFunctional<f64> {
    GaussianFunctional::sign(f).unwrap()
}

#[test]
fn increments_have_ou_variance() {
    let d = sign(BooleanFunction::dictator(2, 0).unwrap());
    let grid = TimeGrid::new(vec![0.0, 0.3, 1.0, 2.5, 6.0]).unwrap();
    let n = 20_000u64;
    let s = sample_paths(&d, &d, &grid, n, 17).unwrap();
    for (j, &t) in grid.points().iter().enumerate() {
        for c in 0..2 {
            let var = s.z.iter().map(|p| p[j][c] * p[j][c]).sum::<f64>() / n as f64;
            let target = 1.0 - (-t).exp();
            // Var of the sample second moment is 2σ⁴/N
            let se = (2.0 / n as f64).sqrt() * target;
            assert!((var - target).abs() <= 4.0 * se + 1e-15, "t={t} coord {c}: {var} vs {target}");
        }
    }
}

#[test]
fn late_martingale_concentration_matches_exact_law() {
    // M_t = 2Φ(Z_t/σ) − 1 with σ = e^{−t/2}, Z_t ~ N(0, 1 − e^{−t})
    let d1 = sign(BooleanFunction::dictator(1, 0).unwrap());
    let t = 6.0_f64;
    let grid = TimeGrid::new(vec![t]).unwrap();
    let n = 40_000u64;
    let s = sample_paths(&d1, &d1, &grid, n, 23).unwrap();
    let hits = s.m_f[0].iter().filter(|p| p[0].values[0].abs() > 0.99).count() as f64 / n as f64;
    let q = {
        // Φ^{-1}(0.995) by bisection on the library cdf
        let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < 0.995 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let sigma = (-t / 2.0).exp();
    let exact = 2.0 * normal_sf(sigma * q / (1.0 - (-t).exp()).sqrt());
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((hits - exact).abs() <= 4.0 * se, "{hits} vs {exact}");
    // about 90%, not almost all paths
    assert!(exact > 0.85 && exact < 0.95);
}

#[test]
fn covariance_curve_matches_orthant_oracle() {
    let maj3 = sign(BooleanFunction::majority(3).unwrap());
    let and3 = sign(BooleanFunction::and(3).unwrap());
    let grid: TimeGrid = "0,0.5,1,3,6".parse().unwrap();
    let est = estimate_pk(&maj3, &and3, 0, &grid, 20_000, 31).unwrap();
    let ef = 0.0;
    let eg = 2.0 * 0.125 - 1.0;
    for ((&t, &p), &se) in grid.points().iter().zip(&est.estimates).zip(&est.se) {
        let exact = exact_cov_sign(&maj3, &and3, t).unwrap() + ef * eg;
        assert!((p - exact).abs() <= 4.0 * se + 1e-12, "t={t}: {p} ± {se} vs {exact}");
    }
}

#[test]
fn standard_error_halves_with_four_times_the_paths() {
    let d1 = sign(BooleanFunction::dictator(1, 0).unwrap());
    let grid: TimeGrid = "0.5,1".parse().unwrap();
    let a = estimate_pk(&d1, &d1, 1, &grid, 10_000, 3).unwrap();
    let b = estimate_pk(&d1, &d1, 1, &grid, 40_000, 3).unwrap();
    for (x, y) in a.se.iter().zip(&b.se) {
        let r = x / y;
        assert!((r - 2.0).abs() < 0.15, "ratio {r}");
    }
}
