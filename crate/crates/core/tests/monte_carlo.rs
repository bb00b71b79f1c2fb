use bridge_exit::exit_mean::*;
use bridge_exit::monte_carlo::*;
use bridge_exit::special_functions::*;
use bridge_exit::walsh::*;
use bridge_exit::*;

fn quad() -> QuadConfig {
    QuadConfig::default().with_tolerances(1e-12, 1e-10)
}

fn assert_z(est: Estimate, reference: f64, k: f64, what: &str) {
    let z = est.z_score(reference);
    assert!(z.abs() <= k, "{what}: {} +- {} vs {reference} (z = {z:.2})", est.mean, est.se);
}

#[test]
fn bessel_bridge_exit_mean_matches_quadrature() {
    let exact = bessel_exit_mean_delta(1.0, 2.0, 1.0, 0.2, &quad()).unwrap().value;
    let cfg = McConfig::new(20_000, 512, 21).unwrap();
    let band = Interval::new(0.8, 1.2).unwrap();
    let s = mc_bessel_exit(1.0, 2.0, 1.0, &band, BesselScheme::Radial, &cfg).unwrap();
    assert_z(s.exit_time(), exact, 3.0, "radial");
}

#[test]
fn ou_exit_mean_matches_green_kernel() {
    let model = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0).unwrap();
    let exact = general_diffusion_exit_mean(&model, 0.3, 0.2, &quad()).unwrap().value;
    let cfg = McConfig::new(20_000, 256, 22).unwrap();
    let s = mc_diffusion_exit(&model, 0.3, 0.2, 1.0, &cfg).unwrap();
    assert_eq!(s.prob_no_exit.mean, 0.0);
    assert_z(s.exit_time(), exact, 3.0, "ou");
}

#[test]
fn time_change_sampler_has_the_supremum_law() {
    let spec = BridgeSpec::from_origin(0.0, 1.0).unwrap();
    let cfg = McConfig::new(20_000, 512, 23).unwrap();
    for h in [0.6, 1.0, 1.5] {
        let s = mc_exit_with(&spec, &Interval::new(-h, h).unwrap(), BridgeSampler::TimeChange, &cfg).unwrap();
        let f = kolmogorov_cdf(h, KolmogorovMethod::Auto, &SeriesControl::default()).unwrap().value;
        assert_z(s.prob_no_exit, f, 3.0, "time change");
    }
}

#[test]
fn crossing_correction_reduces_bias() {
    let spec = BridgeSpec::from_origin(1.0, 1.0).unwrap();
    let band = Interval::new(-0.1, 0.1).unwrap();
    let exact = bridge_exit_mean_delta(&spec, 0.1, &quad()).unwrap().value;
    let (mut on, mut off) = (0.0, 0.0);
    for seed in 0..10 {
        let cfg = McConfig::new(5_000, 512, 100 + seed).unwrap();
        on += (mc_exit(&spec, &band, &cfg).unwrap().mean_exit_time - exact).abs();
        off += (mc_exit(&spec, &band, &cfg.with_correction(false)).unwrap().mean_exit_time - exact).abs();
    }
    assert!(on < off, "corrected {} vs plain {}", on / 10.0, off / 10.0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = BridgeSpec::from_origin(1.0, 1.0).unwrap();
    let band = Interval::new(-0.1, 0.1).unwrap();
    let cfg = McConfig::new(3_000, 256, 24).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                mc_exit(&spec, &band, &cfg).unwrap(),
                mc_last_passage(1.0, 20.0, &cfg).unwrap(),
                mc_walk_embedding(0.33, 1.0, 0.25, &cfg).unwrap(),
            )
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.0, four.0);
    assert_eq!(one.1, four.1);
    assert_eq!(one.2, four.2);
}

#[test]
fn exit_position_within_lemma_bound_and_leans_to_the_endpoint() {
    let cfg = McConfig::new(20_000, 512, 25).unwrap();
    for y in [0.1, 0.5, 1.0] {
        let spec = BridgeSpec::from_origin(y, 1.0).unwrap();
        let band = Interval::new(-0.1, 0.1).unwrap();
        let pos = mc_exit_position(&spec, &band, &cfg).unwrap();
        let mean = bridge_exit_mean_band(&spec, &band, &quad()).unwrap().value;
        let bound = exit_position_bound(-0.1, 0.1, y, 1.0, mean).unwrap();
        assert!(pos.drift_integral.mean.abs() <= bound, "y = {y}");
        if y == 0.1 {
            // the raw average cannot resolve a mean of about 1e-3 at this path count
            let exact = bridge_exit_position_mean(&spec, &band, &quad()).unwrap().value;
            assert!(exact > 0.0);
            assert!(pos.drift_integral.mean > 3.0 * pos.drift_integral.se);
            assert_z(pos.drift_integral, exact, 3.0, "drift integral");
            assert_z(pos.raw, exact, 3.0, "raw");
        }
    }
}

#[test]
fn last_passage_mean_is_stable_across_seeds() {
    let quad = quad();
    // E[lambda] = int_0^inf (1 - CDF)
    let exact = bridge_exit::quadrature::integrate_semi_infinite(
        |s| if s > 0.0 { 1.0 - last_passage_cdf(s, 1.0, &quad).unwrap() } else { 1.0 },
        &QuadConfig::default().with_tolerances(1e-9, 1e-9),
    )
    .unwrap()
    .value;
    assert!((exact - 2.0 / 3.0).abs() < 1e-6, "{exact}");
    for seed in [31, 32] {
        let s = mc_last_passage(1.0, 20.0, &McConfig::new(10_000, 256, seed).unwrap()).unwrap();
        assert_eq!(s.censored, 0);
        assert_z(Estimate::from_samples(&s.samples), exact, 4.0, "last passage mean");
    }
}

#[test]
fn bessel_midpoint_histogram() {
    let (x, y, t) = (1.0, 2.0, 1.0);
    let cfg = McConfig::new(10_000, 64, 26).unwrap();
    let bins = 20;
    let (lo, hi) = (0.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for i in 0..cfg.n_paths {
        let path = sample_bessel3_bridge(x, y, t, BesselScheme::Radial, &cfg, i as u64).unwrap();
        let z = path[cfg.n_steps / 2];
        let k = ((z - lo) / width) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let norm = bessel3_density(t, x, y).unwrap();
    let mut chi2 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let (a, b) = (lo + k as f64 * width, lo + (k + 1) as f64 * width);
        let p = bridge_exit::quadrature::integrate_1d(
            |z| bessel3_density(t / 2.0, x, z).unwrap() * bessel3_density(t / 2.0, z, y).unwrap() / norm,
            a.max(1e-12),
            b,
            &QuadConfig::default(),
        )
        .unwrap()
        .value;
        let e = p * cfg.n_paths as f64;
        if e > 5.0 {
            chi2 += (c as f64 - e).powi(2) / e;
        }
    }
    // 20 bins: chi-square 99.9th percentile is about 43
    assert!(chi2 < 45.0, "chi2 = {chi2}");
}

#[test]
fn walk_parity_is_reflection_symmetric() {
    let cfg = McConfig::new(20_000, 256, 27).unwrap();
    for x in [0.1, 0.33] {
        let a = mc_walk_embedding(x, 1.0, 0.25, &cfg).unwrap().q;
        let b = mc_walk_embedding(-x, 1.0, 0.25, &cfg.with_seed(28)).unwrap().q;
        let z = (a.mean - b.mean) / (a.se * a.se + b.se * b.se).sqrt();
        assert!(z.abs() <= 3.0, "x = {x}: z = {z}");
    }
}

#[test]
fn formula_matches_walk_at_one_point() {
    let cfg = McConfig::new(20_000, 512, 29).unwrap();
    let route = ExitPositionRoute::Quadrature(quad());
    let f = q_formula(0.33, 1.0, 0.25, &route).unwrap();
    let w = mc_walk_embedding(0.33, 1.0, 0.25, &cfg).unwrap();
    assert_z(w.q, f.q, 3.0, "q(0.33)");
    let sym = q_formula(-0.33, 1.0, 0.25, &route).unwrap();
    assert!((sym.q - f.q).abs() < 1e-9);
}

#[test]
fn near_band_inner_mean_bound() {
    let (t, h) = (1.0, 0.2);
    let route = ExitPositionRoute::Quadrature(quad());
    for x in [0.02, 0.07, 0.13, 0.19] {
        let e = inner_exit_position(x, t, h, &route, 0).unwrap().mean;
        let bound = 2.0 * h * h / t * (2.0 * h + x + 3.0 * (2.0 * t).sqrt());
        assert!(e.abs() <= bound, "x = {x}: {e} vs {bound}");
    }
}

#[test]
fn corollary_integral_shrinks_with_h() {
    let route = ExitPositionRoute::Quadrature(QuadConfig::default().with_tolerances(1e-9, 1e-9));
    let a = walsh_integrals(1.0, 0.4, &route).unwrap();
    let b = walsh_integrals(1.0, 0.2, &route).unwrap();
    assert!(b.corollary.mean < a.corollary.mean);
    assert!(b.parity_residual.mean.abs() < 1e-6 && b.tail_bound < 1e-6);
}
