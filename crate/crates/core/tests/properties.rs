//! Property tests for invariants that hold for every input.

use corrbench::bounds::analyze_pair;
use corrbench::gaussian::{moment, ou_apply, GaussianFunctional};
use corrbench::gronwall::{horizon, integrate_extremal, verify_conclusion, ConclusionStatus, HORIZON_MULTIPLE};
use corrbench::hermite::hermite_tensor;
use corrbench::level::suite::random_density;
use corrbench::level::{check_lvl21, density::w2_squared_1d, density::DensitySpec};
use corrbench::monotone::random_monotone;
use corrbench::process::{conditional_moment, conditional_moment_quadrature, TimeGrid};
use corrbench::{BooleanFunction, Normalization};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table(n: usize) -> impl Strategy<Value = BooleanFunction> {
    prop::collection::vec(any::<bool>(), 1 << n)
        .prop_map(move |bits| BooleanFunction::from_fn(n, |i| bits[i]).unwrap())
}

fn unit_theta(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn function_files_round_trip((n, f) in (0usize..=9).prop_flat_map(|n| (Just(n), table(n)))) {
        prop_assert_eq!(BooleanFunction::from_hex(n, &f.to_hex()).unwrap(), f.clone());
        prop_assert_eq!(BooleanFunction::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn monotone_pairs_are_positively_correlated(n in 1usize..=6, s1 in any::<u64>(), s2 in any::<u64>()) {
        let f = random_monotone(n, s1, 200).unwrap();
        let g = random_monotone(n, s2, 200).unwrap();
        prop_assert!(f.is_monotone() && g.is_monotone());
        let r = analyze_pair(&f, &g, Normalization::Std).unwrap();
        prop_assert!(*r.cor.numer() >= 0);
        // symmetric in the pair
        prop_assert_eq!(r.cor, analyze_pair(&g, &f, Normalization::Std).unwrap().cor);
    }

    #[test]
    fn hermite_tensors_are_symmetric(k in 0usize..=4, x in prop::collection::vec(-3.0f64..3.0, 1..=3)) {
        let h = hermite_tensor(k, &x).unwrap();
        prop_assert_eq!(h.len(), x.len().pow(k as u32));
        prop_assert!(h.asymmetry() <= 1e-12);
    }

    #[test]
    fn halfspace_conditional_moments_match_quadrature(
        (theta, z) in (1usize..=2).prop_flat_map(|n| (unit_theta(n), prop::collection::vec(-1.5f64..1.5, n))),
        a in -1.0f64..1.0,
        t in 0.05f64..3.0,
        k in 0usize..=3,
    ) {
        let h = GaussianFunctional::halfspace(theta, a).unwrap();
        let closed = conditional_moment(&h, k, &z, t).unwrap();
        let quad = conditional_moment_quadrature(&h, k, &z, t).unwrap();
        prop_assert!(closed.max_abs_diff(&quad) <= 1e-8, "{:?} vs {:?}", closed.values, quad.values);
    }

    #[test]
    fn semigroup_scales_moments(theta in unit_theta(2), a in -1.0f64..1.0, t in 0.0f64..2.0, k in 0usize..=3) {
        let h = GaussianFunctional::halfspace(theta, a).unwrap();
        let smoothed = moment(&ou_apply(&h, t).unwrap(), k).unwrap();
        let scaled = moment(&h, k).unwrap().scaled((-(k as f64) * t / 2.0).exp());
        prop_assert!(smoothed.max_abs_diff(&scaled) <= 1e-8);
    }

    #[test]
    fn divergences_are_nonnegative(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_density(&mut rng, d);
        let y = random_density(&mut rng, d);
        prop_assert!(x.kl() >= -1e-12);
        let c = check_lvl21(&x, &y).unwrap();
        prop_assert!(c.kl_x >= -1e-12 && c.kl_y >= -1e-12);
        prop_assert!(c.margin.holds(1e-6));
        if d == 1 {
            let w = w2_squared_1d(&x, &DensitySpec::standard(1).unwrap()).unwrap();
            prop_assert!(w >= -1e-12);
        }
    }

    #[test]
    fn extremal_trajectories_stay_above_half(k in 0.01f64..3000.0, p0 in 0.001f64..0.99, c in -10.0f64..=0.0) {
        let dp0 = c * p0;
        let h = horizon(k, p0, dp0);
        prop_assert!(h > 0.0);
        let dt = (h / 400.0).min(1e-3);
        let traj = integrate_extremal(k, p0, dp0, dt, HORIZON_MULTIPLE * h).unwrap();
        let r = verify_conclusion(&traj);
        prop_assert_eq!(r.status, ConclusionStatus::Checked);
        prop_assert!(r.holds && r.worst_margin >= 0.0);
    }

    #[test]
    fn uniform_grids_parse(start in 0.0f64..2.0, len in 0.1f64..3.0, steps in 1u32..60) {
        let end = start + len;
        let h = len / steps as f64;
        let g: TimeGrid = format!("{start}:{end}:{h}").parse().unwrap();
        let pts = g.points();
        prop_assert!(pts.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((pts[0] - start).abs() < 1e-12);
        prop_assert!((pts[pts.len() - 1] - end).abs() <= 1e-9 * end.max(1.0));
        prop_assert_eq!(pts.len(), steps as usize + 1);
    }
}
