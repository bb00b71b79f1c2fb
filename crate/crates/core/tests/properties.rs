use bridge_exit::exit_mean::*;
use bridge_exit::monte_carlo::*;
use bridge_exit::quadrature::*;
use bridge_exit::special_functions::*;
use bridge_exit::*;
use proptest::prelude::*;

fn ctrl() -> SeriesControl {
    SeriesControl::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kolmogorov_is_a_cdf(x in 0.05f64..6.0, d in 0.001f64..0.5) {
        let f = |x| kolmogorov_cdf(x, KolmogorovMethod::Auto, &ctrl()).unwrap().value;
        let (a, b) = (f(x), f(x + d));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn dual_series_agree(x in 0.2f64..5.0) {
        let a = kolmogorov_cdf(x, KolmogorovMethod::Alternating, &ctrl()).unwrap();
        let t = kolmogorov_cdf(x, KolmogorovMethod::Theta, &ctrl()).unwrap();
        prop_assert!((a.value - t.value).abs() <= 1e-12);
    }

    #[test]
    fn killed_density_is_even_and_below_free(z in -0.99f64..0.99, t in 0.01f64..4.0) {
        let d = delta(z, 1.0, t, &ctrl()).unwrap().value;
        let m = delta(-z, 1.0, t, &ctrl()).unwrap().value;
        let free = gauss_density(t, 0.0, z).unwrap();
        prop_assert!(d >= -1e-14);
        prop_assert!((d - m).abs() <= 1e-12);
        prop_assert!(d <= free + 1e-12);
    }

    #[test]
    fn kernels_agree(z in -0.9f64..0.9, t in 0.05f64..2.0) {
        let a = delta_with(z, 1.0, t, KernelMethod::Images, &ctrl()).unwrap().value;
        let b = delta_with(z, 1.0, t, KernelMethod::Eigen, &ctrl()).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-11);
    }

    #[test]
    fn quadrature_is_exact_on_cubics(c in prop::array::uniform4(-3.0f64..3.0), a in -2.0f64..0.0, b in 0.1f64..2.0) {
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
        let anti = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
        let r = integrate_1d(f, a, b, &QuadConfig::default()).unwrap();
        prop_assert!((r.value - (anti(b) - anti(a))).abs() <= 1e-12 * (1.0 + r.value.abs()));
    }

    #[test]
    fn survival_is_a_probability(y in -0.9f64..0.9, t in 0.1f64..3.0) {
        let p = survival_probability_bridge(&BridgeSpec::from_origin(y, t).unwrap(), 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn bm_mean_is_the_parabola(x in -0.99f64..0.99) {
        prop_assert_eq!(bm_exit_mean(x, -1.0, 1.0).unwrap(), (1.0 - x) * (x + 1.0));
    }

    #[test]
    fn time_bound_caps_at_horizon(b in 0.01f64..1.0, y in 1.0f64..5.0, t in 0.1f64..3.0) {
        let v = exit_time_bound(-b, b, y, t).unwrap();
        prop_assert!(v <= t && v > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn probabilities_close_and_runs_repeat(seed in any::<u64>(), y in -2.0f64..2.0, h in 0.05f64..1.0) {
        let spec = BridgeSpec::from_origin(y, 1.0).unwrap();
        let band = Interval::new(-h, h).unwrap();
        let cfg = McConfig::new(300, 64, seed).unwrap();
        let s = mc_exit(&spec, &band, &cfg).unwrap();
        let total = s.prob_upper_exit.mean + s.prob_lower_exit.mean + s.prob_no_exit.mean;
        prop_assert!((total - 1.0).abs() < 1e-15);
        prop_assert_eq!(s, mc_exit(&spec, &band, &cfg).unwrap());
        if y.abs() >= h {
            prop_assert_eq!(s.prob_no_exit.mean, 0.0);
        }
    }

    #[test]
    fn bridge_paths_are_pinned(seed in any::<u64>(), x in -1.0f64..1.0, y in -1.0f64..1.0, idx in 0u64..1000) {
        let spec = BridgeSpec::new(x, y, 2.0).unwrap();
        let cfg = McConfig::new(1, 32, seed).unwrap();
        let p = sample_brownian_bridge(&spec, &cfg, idx).unwrap();
        prop_assert_eq!(p[0], x);
        prop_assert_eq!(p[32], y);
        prop_assert_eq!(p, sample_brownian_bridge(&spec, &cfg, idx).unwrap());
    }

    #[test]
    fn walk_levels_move_by_one(seed in any::<u64>(), x in -0.5f64..0.5) {
        let cfg = McConfig::new(1, 128, seed).unwrap();
        let w = sample_walk_embedding(x, 1.0, 0.25, &cfg, 0).unwrap();
        prop_assert_eq!(w.levels[0], 0);
        prop_assert!(w.levels.windows(2).all(|p| (p[1] - p[0]).abs() == 1));
        prop_assert!(w.tau_times.windows(2).all(|p| p[1] > p[0]));
        prop_assert_eq!(w.k_star + 1, w.levels.len());
    }
}
