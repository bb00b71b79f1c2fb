//! Monte Carlo oracle: exact-in-law bridge samplers, exit statistics with
//! crossing correction, the random-walk embedding and last-passage sampling.
//!
//! Path `i` of a run always draws from stream `i` of the seeded generator and
//! results are aggregated in path order, so output does not depend on the
//! number of worker threads.

mod engine;
mod rng;
mod samplers;

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, require_positive, Error, Result};
use crate::exit_mean::{BridgeSpec, DiffusionModel};
use crate::interval::Interval;
use engine::{Flow, Point, Scanner, Watcher};
pub use rng::{derive_seed, path_rng, PathRng};
pub(crate) use rng::map_paths;
use samplers::*;

/// Reproducible Monte Carlo run descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Number of grid steps on `[0, horizon]`.
    pub n_steps: usize,
    pub seed: u64,
    /// Detect crossings between grid points with the bridge crossing probability.
    pub crossing_correction: bool,
    /// Bisection depth used to place corrected crossings. Zero gives one
    /// Bernoulli draw per grid step stamped at the step midpoint.
    pub refine_levels: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_steps: 512,
            seed: 0,
            crossing_correction: true,
            refine_levels: 10,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            n_paths,
            n_steps,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if self.n_steps < 2 {
            return Err(Error::Config("n_steps must be at least 2".into()));
        }
        if self.refine_levels > 30 {
            return Err(Error::Config("refine_levels must be at most 30".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_correction(self, crossing_correction: bool) -> Self {
        Self {
            crossing_correction,
            ..self
        }
    }

    fn scanner(&self) -> Scanner {
        Scanner {
            correction: self.crossing_correction,
            refine_levels: self.refine_levels,
            skip_below: 1e-10,
            mark_levels: self.refine_levels.min(6),
        }
    }

    fn grid(&self, horizon: f64) -> Grid {
        Grid {
            horizon,
            n: self.n_steps,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and `sd / sqrt(n)` of the values. Empty input gives NaN.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, se: 0.0 };
        }
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            mean,
            se: (ss / (n - 1) as f64 / n as f64).sqrt(),
        }
    }

    /// Binomial proportion `count / n`.
    pub fn proportion(count: usize, n: usize) -> Self {
        let p = count as f64 / n as f64;
        Self {
            mean: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    /// `(mean - reference) / se`; infinite when the SE vanishes but the gap does not.
    pub fn z_score(&self, reference: f64) -> f64 {
        let gap = self.mean - reference;
        if self.se > 0.0 {
            gap / self.se
        } else if gap == 0.0 {
            0.0
        } else {
            gap.signum() * f64::INFINITY
        }
    }

    /// Whether `reference` lies within `k` standard errors.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.se
    }
}

/// Exit statistics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    /// Mean over the paths that exited before the horizon (NaN if none did).
    pub mean_exit_time: f64,
    pub se_exit_time: f64,
    /// Position at the exit time, or at the horizon for paths that stayed inside.
    pub mean_exit_position: f64,
    pub se_exit_position: f64,
    pub prob_upper_exit: Estimate,
    pub prob_lower_exit: Estimate,
    pub prob_no_exit: Estimate,
    pub n_paths: usize,
    pub n_exited: usize,
    /// The grid step is wide relative to the band (`sqrt(sigma^2 dt) > width / 16`).
    pub coarse_grid: bool,
}

impl ExitStats {
    pub fn exit_time(&self) -> Estimate {
        Estimate {
            mean: self.mean_exit_time,
            se: self.se_exit_time,
        }
    }

    pub fn exit_position(&self) -> Estimate {
        Estimate {
            mean: self.mean_exit_position,
            se: self.se_exit_position,
        }
    }
}

/// Two estimators of `E[B]` at the exit time of a Brownian bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPositionEstimate {
    /// Average of the clamped exit positions.
    pub raw: Estimate,
    /// `x + E[int_0^tau (y - B_s)/(T - s) ds]`, from the bridge drift
    /// decomposition; much smaller variance on narrow bands.
    pub drift_integral: Estimate,
}

/// How a Brownian bridge path is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BridgeSampler {
    /// Sequential Gaussian conditioning.
    #[default]
    Conditional,
    /// Time-changed Brownian motion `(1 - t/T) W(T t / (T - t))` plus the linear drift.
    TimeChange,
}

/// How a Bessel(3) bridge path is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BesselScheme {
    /// Norm of a 3-d Brownian bridge with a randomised end direction; exact on the grid.
    #[default]
    Radial,
    /// Euler–Maruyama on the bridge SDE with reflection at 0.
    Euler,
}

/// One path of the random-walk embedding `tau_k = inf{t > tau_(k-1): |W_t - W_tau_(k-1)| = h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEmbedding {
    /// `tau_0 = 0 < tau_1 < ...`, all at most the horizon.
    pub tau_times: Vec<f64>,
    /// `W(tau_k) = levels[k] * h`.
    pub levels: Vec<i64>,
    /// Index of the last embedded step before the horizon.
    pub k_star: usize,
}

/// Parity estimate from many embedded walks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkEmbeddingStats {
    /// Fraction of paths with even `k_star`.
    pub q: Estimate,
    /// Fraction of embedded steps that went up.
    pub up_fraction: Estimate,
    pub mean_steps: f64,
    pub n_paths: usize,
}

/// Last zero of Brownian motion before it leaves `(-h, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastPassageSamples {
    /// Last passage times of the paths that exited, in path order.
    pub samples: Vec<f64>,
    /// Matching exit times.
    pub exit_times: Vec<f64>,
    /// Paths still inside the band at the simulation horizon.
    pub censored: usize,
}

impl LastPassageSamples {
    /// Empirical CDF at `t` over all paths; censored paths count as `> t`.
    pub fn empirical_cdf(&self, t: f64) -> Estimate {
        let count = self.samples.iter().filter(|&&s| s <= t).count();
        Estimate::proportion(count, self.samples.len() + self.censored)
    }
}

// -- watchers ---------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    exit: Option<(f64, bool)>,
    position: f64,
    drift_integral: f64,
}

struct ExitWatcher {
    band: (f64, f64),
    exit: Option<(f64, bool)>,
    /// `(end, horizon)` of the bridge whose drift is integrated.
    drift_of: Option<(f64, f64)>,
    drift_integral: f64,
}

impl ExitWatcher {
    fn new(band: &Interval, drift_of: Option<(f64, f64)>) -> Self {
        Self {
            band: (band.lo, band.hi),
            exit: None,
            drift_of,
            drift_integral: 0.0,
        }
    }

    fn outcome<P: Point>(self, last: Option<P>) -> PathOutcome {
        let position = match (self.exit, last) {
            (Some((_, upper)), _) => {
                if upper {
                    self.band.1
                } else {
                    self.band.0
                }
            }
            (None, Some(p)) => p.level(),
            (None, None) => unreachable!("a stopped path has an exit"),
        };
        PathOutcome {
            exit: self.exit,
            position,
            drift_integral: self.drift_integral,
        }
    }
}

impl Watcher for ExitWatcher {
    fn band(&self) -> (f64, f64) {
        self.band
    }

    fn on_exit(&mut self, time: f64, upper: bool) -> Flow {
        self.exit = Some((time, upper));
        Flow::Stop
    }

    fn on_advance(&mut self, t0: f64, l0: f64, t1: f64, l1: f64) {
        if let Some((end, horizon)) = self.drift_of {
            let tm = 0.5 * (t0 + t1);
            self.drift_integral += (end - 0.5 * (l0 + l1)) / (horizon - tm) * (t1 - t0);
        }
    }
}

struct WalkWatcher {
    h: f64,
    level: i64,
    walk: WalkEmbedding,
}

impl Watcher for WalkWatcher {
    fn band(&self) -> (f64, f64) {
        let c = self.level as f64 * self.h;
        (c - self.h, c + self.h)
    }

    fn on_exit(&mut self, time: f64, upper: bool) -> Flow {
        self.level += if upper { 1 } else { -1 };
        self.walk.tau_times.push(time);
        self.walk.levels.push(self.level);
        Flow::Continue
    }
}

struct LastPassageWatcher {
    h: f64,
    last_zero: f64,
    exit: Option<f64>,
}

impl Watcher for LastPassageWatcher {
    fn band(&self) -> (f64, f64) {
        (-self.h, self.h)
    }

    fn mark(&self) -> Option<f64> {
        Some(0.0)
    }

    fn on_exit(&mut self, time: f64, _upper: bool) -> Flow {
        self.exit = Some(time);
        Flow::Stop
    }

    fn on_mark(&mut self, time: f64) {
        self.last_zero = time;
    }
}

// -- aggregation --------------------------------------------------------------

fn aggregate(outcomes: &[PathOutcome], coarse_grid: bool) -> ExitStats {
    let n = outcomes.len();
    let times: Vec<f64> = outcomes.iter().filter_map(|o| o.exit.map(|e| e.0)).collect();
    let positions: Vec<f64> = outcomes.iter().map(|o| o.position).collect();
    let upper = outcomes.iter().filter(|o| matches!(o.exit, Some((_, true)))).count();
    let lower = outcomes.iter().filter(|o| matches!(o.exit, Some((_, false)))).count();
    let time = Estimate::from_samples(&times);
    let position = Estimate::from_samples(&positions);
    ExitStats {
        mean_exit_time: time.mean,
        se_exit_time: time.se,
        mean_exit_position: position.mean,
        se_exit_position: position.se,
        prob_upper_exit: Estimate::proportion(upper, n),
        prob_lower_exit: Estimate::proportion(lower, n),
        prob_no_exit: Estimate::proportion(n - upper - lower, n),
        n_paths: n,
        n_exited: upper + lower,
        coarse_grid,
    }
}

fn is_coarse(sigma2: f64, horizon: f64, cfg: &McConfig, band: &Interval) -> bool {
    (sigma2 * horizon / cfg.n_steps as f64).sqrt() > band.width() / 16.0
}

fn check_start(start: f64, band: &Interval) -> Result<()> {
    if band.contains(start) {
        Ok(())
    } else {
        Err(domain("x", start, "must lie inside the band"))
    }
}

// -- path samplers --------------------------------------------------------------

/// Uniform grid `t_i = T i / n_steps`, `i = 0..=n_steps`.
pub fn time_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    let g = Grid { horizon, n: n_steps };
    (0..=n_steps).map(|i| g.time(i)).collect()
}

/// Brownian bridge values on the uniform grid; the last value is exactly the endpoint.
pub fn sample_brownian_bridge(spec: &BridgeSpec, cfg: &McConfig, path_index: u64) -> Result<Vec<f64>> {
    sample_brownian_bridge_with(spec, BridgeSampler::Conditional, cfg, path_index)
}

pub fn sample_brownian_bridge_with(
    spec: &BridgeSpec,
    sampler: BridgeSampler,
    cfg: &McConfig,
    path_index: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = path_rng(cfg.seed, path_index);
    let grid = cfg.grid(spec.horizon);
    Ok(match sampler {
        BridgeSampler::Conditional => grid_path(&grid, spec.start, &mut rng, bridge_step(spec.end, spec.horizon)),
        BridgeSampler::TimeChange => {
            grid_path(&grid, spec.start, &mut rng, time_change_step(spec.start, spec.end, spec.horizon))
        }
    })
}

fn check_bessel(x: f64, y: f64, horizon: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(domain("x", x, "must be finite and >= 0"));
    }
    require_positive("y", y)?;
    require_positive("T", horizon)
}

/// Bessel(3) bridge values from `x >= 0` to `y > 0` on the uniform grid.
pub fn sample_bessel3_bridge(
    x: f64,
    y: f64,
    horizon: f64,
    scheme: BesselScheme,
    cfg: &McConfig,
    path_index: u64,
) -> Result<Vec<f64>> {
    check_bessel(x, y, horizon)?;
    cfg.validate()?;
    let mut rng = path_rng(cfg.seed, path_index);
    let grid = cfg.grid(horizon);
    Ok(match scheme {
        BesselScheme::Radial => {
            let (start, end) = radial_endpoints(x, y, horizon, &mut rng);
            grid_path(&grid, start, &mut rng, radial_bridge_step(end, horizon))
                .iter()
                .map(Point::level)
                .collect()
        }
        BesselScheme::Euler => grid_path(&grid, x, &mut rng, bessel_euler_step(y, horizon)),
    })
}

// -- exit statistics ------------------------------------------------------------

fn bridge_outcomes(spec: &BridgeSpec, band: &Interval, sampler: BridgeSampler, cfg: &McConfig) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    check_start(spec.start, band)?;
    let scanner = cfg.scanner();
    let grid = cfg.grid(spec.horizon);
    Ok(map_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut w = ExitWatcher::new(band, Some((spec.end, spec.horizon)));
        let last = match sampler {
            BridgeSampler::Conditional => drive(
                &grid,
                spec.start,
                &scanner,
                &mut w,
                &mut rng,
                bridge_step(spec.end, spec.horizon),
                |_| 1.0,
            ),
            BridgeSampler::TimeChange => drive(
                &grid,
                spec.start,
                &scanner,
                &mut w,
                &mut rng,
                time_change_step(spec.start, spec.end, spec.horizon),
                |_| 1.0,
            ),
        };
        w.outcome(last)
    }))
}

/// Exit statistics of the Brownian bridge `spec` from `band`.
pub fn mc_exit(spec: &BridgeSpec, band: &Interval, cfg: &McConfig) -> Result<ExitStats> {
    mc_exit_with(spec, band, BridgeSampler::Conditional, cfg)
}

pub fn mc_exit_with(spec: &BridgeSpec, band: &Interval, sampler: BridgeSampler, cfg: &McConfig) -> Result<ExitStats> {
    let outcomes = bridge_outcomes(spec, band, sampler, cfg)?;
    Ok(aggregate(&outcomes, is_coarse(1.0, spec.horizon, cfg, band)))
}

/// `E[B]` at the exit time of the bridge from `band`.
pub fn mc_exit_position(spec: &BridgeSpec, band: &Interval, cfg: &McConfig) -> Result<ExitPositionEstimate> {
    let outcomes = bridge_outcomes(spec, band, BridgeSampler::Conditional, cfg)?;
    let raw: Vec<f64> = outcomes.iter().map(|o| o.position).collect();
    let drift: Vec<f64> = outcomes.iter().map(|o| spec.start + o.drift_integral).collect();
    Ok(ExitPositionEstimate {
        raw: Estimate::from_samples(&raw),
        drift_integral: Estimate::from_samples(&drift),
    })
}

/// Exit statistics of standard Brownian motion from `x0`, simulated up to `horizon`.
pub fn mc_bm_exit(x0: f64, band: &Interval, horizon: f64, cfg: &McConfig) -> Result<ExitStats> {
    mc_diffusion_exit_band(&DiffusionModel::brownian(), x0, band, horizon, cfg)
}

/// Exit statistics of the diffusion from `(x0 - h, x0 + h)`, simulated up to `horizon`.
pub fn mc_diffusion_exit(model: &DiffusionModel, x0: f64, h: f64, horizon: f64, cfg: &McConfig) -> Result<ExitStats> {
    require_finite("x0", x0)?;
    require_positive("h", h)?;
    mc_diffusion_exit_band(model, x0, &Interval::new(x0 - h, x0 + h)?, horizon, cfg)
}

fn mc_diffusion_exit_band(
    model: &DiffusionModel,
    x0: f64,
    band: &Interval,
    horizon: f64,
    cfg: &McConfig,
) -> Result<ExitStats> {
    cfg.validate()?;
    require_positive("T", horizon)?;
    check_start(x0, band)?;
    if band.lo < model.state.lo || band.hi > model.state.hi {
        return Err(domain("h", band.width() / 2.0, "band must lie inside the state interval"));
    }
    let scanner = cfg.scanner();
    let grid = cfg.grid(horizon);
    let outcomes = map_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut w = ExitWatcher::new(band, None);
        let last = drive(&grid, x0, &scanner, &mut w, &mut rng, euler_step(model), |&v| {
            let a = model.diffusion(v);
            a * a
        });
        w.outcome(last)
    });
    let a0 = model.diffusion(x0);
    Ok(aggregate(&outcomes, is_coarse(a0 * a0, horizon, cfg, band)))
}

/// Exit statistics of the Bessel(3) bridge from `x` to `y` over `horizon`.
/// Pass `lo = -inf` (or any negative value) for a one-sided band from 0.
pub fn mc_bessel_exit(
    x: f64,
    y: f64,
    horizon: f64,
    band: &Interval,
    scheme: BesselScheme,
    cfg: &McConfig,
) -> Result<ExitStats> {
    check_bessel(x, y, horizon)?;
    cfg.validate()?;
    check_start(x, band)?;
    let scanner = cfg.scanner();
    let grid = cfg.grid(horizon);
    let outcomes = map_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut w = ExitWatcher::new(band, None);
        match scheme {
            BesselScheme::Radial => {
                let (start, end) = radial_endpoints(x, y, horizon, &mut rng);
                let last = drive(&grid, start, &scanner, &mut w, &mut rng, radial_bridge_step(end, horizon), |_| 1.0);
                w.outcome(last)
            }
            BesselScheme::Euler => {
                let last = drive(&grid, x, &scanner, &mut w, &mut rng, bessel_euler_step(y, horizon), |_| 1.0);
                w.outcome(last)
            }
        }
    });
    Ok(aggregate(&outcomes, is_coarse(1.0, horizon, cfg, band)))
}

// -- random-walk embedding ------------------------------------------------------

fn check_walk(horizon: f64, h: f64) -> Result<()> {
    require_positive("T", horizon)?;
    require_positive("h", h)
}

fn embed(end: Option<f64>, horizon: f64, h: f64, cfg: &McConfig, path_index: u64) -> WalkEmbedding {
    let mut rng = path_rng(cfg.seed, path_index);
    let mut w = WalkWatcher {
        h,
        level: 0,
        walk: WalkEmbedding {
            tau_times: vec![0.0],
            levels: vec![0],
            k_star: 0,
        },
    };
    let grid = cfg.grid(horizon);
    let scanner = cfg.scanner();
    match end {
        Some(y) => drive(&grid, 0.0, &scanner, &mut w, &mut rng, bridge_step(y, horizon), |_| 1.0),
        None => drive(&grid, 0.0, &scanner, &mut w, &mut rng, brownian_step, |_| 1.0),
    };
    w.walk.k_star = w.walk.tau_times.len() - 1;
    w.walk
}

/// Embedded walk of the Brownian path pinned at `W_T = x`.
pub fn sample_walk_embedding(x: f64, horizon: f64, h: f64, cfg: &McConfig, path_index: u64) -> Result<WalkEmbedding> {
    require_finite("x", x)?;
    check_walk(horizon, h)?;
    cfg.validate()?;
    Ok(embed(Some(x), horizon, h, cfg, path_index))
}

fn walk_stats(walks: &[WalkEmbedding]) -> WalkEmbeddingStats {
    let n = walks.len();
    let even = walks.iter().filter(|w| w.k_star % 2 == 0).count();
    let steps: usize = walks.iter().map(|w| w.k_star).sum();
    let ups = walks
        .iter()
        .map(|w| w.levels.windows(2).filter(|p| p[1] > p[0]).count())
        .sum::<usize>();
    WalkEmbeddingStats {
        q: Estimate::proportion(even, n),
        up_fraction: if steps == 0 {
            Estimate {
                mean: f64::NAN,
                se: f64::NAN,
            }
        } else {
            Estimate::proportion(ups, steps)
        },
        mean_steps: steps as f64 / n as f64,
        n_paths: n,
    }
}

/// Estimates `q(x) = P(k_star even | W_T = x)` from bridge paths.
pub fn mc_walk_embedding(x: f64, horizon: f64, h: f64, cfg: &McConfig) -> Result<WalkEmbeddingStats> {
    require_finite("x", x)?;
    check_walk(horizon, h)?;
    cfg.validate()?;
    let walks = map_paths(cfg.n_paths, |i| embed(Some(x), horizon, h, cfg, i as u64));
    Ok(walk_stats(&walks))
}

/// Embedded walk of free Brownian motion on `[0, horizon]`.
pub fn mc_free_walk_embedding(horizon: f64, h: f64, cfg: &McConfig) -> Result<WalkEmbeddingStats> {
    check_walk(horizon, h)?;
    cfg.validate()?;
    let walks = map_paths(cfg.n_paths, |i| embed(None, horizon, h, cfg, i as u64));
    Ok(walk_stats(&walks))
}

// -- last passage -----------------------------------------------------------------

/// Samples the last zero of Brownian motion from 0 before it leaves `(-h, h)`,
/// simulating each path up to `horizon`.
pub fn mc_last_passage(h: f64, horizon: f64, cfg: &McConfig) -> Result<LastPassageSamples> {
    require_positive("h", h)?;
    require_positive("T", horizon)?;
    cfg.validate()?;
    let scanner = cfg.scanner();
    let grid = cfg.grid(horizon);
    let runs = map_paths(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i as u64);
        let mut w = LastPassageWatcher {
            h,
            last_zero: 0.0,
            exit: None,
        };
        drive(&grid, 0.0, &scanner, &mut w, &mut rng, brownian_step, |_| 1.0);
        w.exit.map(|e| (w.last_zero, e))
    });
    let mut out = LastPassageSamples {
        samples: Vec::with_capacity(runs.len()),
        exit_times: Vec::with_capacity(runs.len()),
        censored: 0,
    };
    for r in runs {
        match r {
            Some((l, e)) => {
                out.samples.push(l);
                out.exit_times.push(e);
            }
            None => out.censored += 1,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{kolmogorov_cdf, KolmogorovMethod, SeriesControl};

    fn cfg(n_paths: usize, n_steps: usize, seed: u64) -> McConfig {
        McConfig::new(n_paths, n_steps, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 10, 1).is_err());
        assert!(McConfig::new(1, 1, 1).is_err());
        assert!(McConfig::new(1, 2, 1).is_ok());
    }

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::from_samples(&[]).mean.is_nan());
        assert_eq!(Estimate::proportion(0, 10).se, 0.0);
        assert_eq!(Estimate { mean: 1.0, se: 0.0 }.z_score(1.0), 0.0);
    }

    #[test]
    fn bridge_path_ends_at_endpoint_and_is_reproducible() {
        let spec = BridgeSpec::new(0.2, -0.7, 1.5).unwrap();
        let c = cfg(1, 64, 11);
        let a = sample_brownian_bridge(&spec, &c, 3).unwrap();
        let b = sample_brownian_bridge(&spec, &c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 65);
        assert_eq!(a[0], 0.2);
        assert_eq!(a[64], -0.7);
        let t = sample_brownian_bridge_with(&spec, BridgeSampler::TimeChange, &c, 3).unwrap();
        assert_eq!(t[64], -0.7);
    }

    #[test]
    fn bridge_midpoint_marginal() {
        let spec = BridgeSpec::new(0.0, 1.0, 1.0).unwrap();
        let c = cfg(1, 8, 4);
        let mids: Vec<f64> = (0..20_000).map(|i| sample_brownian_bridge(&spec, &c, i).unwrap()[4]).collect();
        let e = Estimate::from_samples(&mids);
        assert!(e.within(0.5, 4.0), "{e:?}");
        let var = mids.iter().map(|v| (v - e.mean).powi(2)).sum::<f64>() / (mids.len() - 1) as f64;
        // sd of the sample variance of a normal is var * sqrt(2/(n-1))
        assert!((var - 0.25).abs() < 4.0 * 0.25 * (2.0f64 / 20_000.0).sqrt(), "{var}");
    }

    #[test]
    fn probabilities_close_exactly() {
        let spec = BridgeSpec::new(0.0, 0.0, 1.0).unwrap();
        let s = mc_exit(&spec, &Interval::new(-0.8, 0.8).unwrap(), &cfg(2000, 64, 5)).unwrap();
        let n = s.n_paths as f64;
        let counts = (s.prob_upper_exit.mean * n).round() + (s.prob_lower_exit.mean * n).round() + (s.prob_no_exit.mean * n).round();
        assert_eq!(counts, n);
        assert_eq!(s.n_exited, (s.prob_upper_exit.mean * n).round() as usize + (s.prob_lower_exit.mean * n).round() as usize);
    }

    #[test]
    fn deterministic_across_runs() {
        let spec = BridgeSpec::new(0.0, 1.0, 1.0).unwrap();
        let band = Interval::new(-0.1, 0.1).unwrap();
        let c = cfg(500, 128, 9);
        assert_eq!(mc_exit(&spec, &band, &c).unwrap(), mc_exit(&spec, &band, &c).unwrap());
    }

    #[test]
    fn survival_matches_kolmogorov() {
        let spec = BridgeSpec::new(0.0, 0.0, 1.0).unwrap();
        let s = mc_exit(&spec, &Interval::new(-1.0, 1.0).unwrap(), &cfg(20_000, 128, 2)).unwrap();
        let f = kolmogorov_cdf(1.0, KolmogorovMethod::Auto, &SeriesControl::default()).unwrap().value;
        assert!(s.prob_no_exit.within(f, 4.0), "{:?} vs {f}", s.prob_no_exit);
    }

    #[test]
    fn bm_mean_exit_time() {
        let s = mc_bm_exit(0.0, &Interval::new(-1.0, 1.0).unwrap(), 20.0, &cfg(10_000, 512, 3)).unwrap();
        assert_eq!(s.n_exited, s.n_paths);
        assert!(s.exit_time().within(1.0, 4.0), "{:?}", s.exit_time());
    }

    #[test]
    fn scaled_diffusion_ratio() {
        let model = DiffusionModel::scaled_brownian(2.0).unwrap();
        let h = 0.2;
        let s = mc_diffusion_exit(&model, 0.0, h, 1.0, &cfg(10_000, 256, 8)).unwrap();
        let ratio = s.exit_time();
        assert!((ratio.mean / (h * h) - 0.25).abs() < 4.0 * ratio.se / (h * h));
    }

    #[test]
    fn walk_levels_step_by_one() {
        let c = cfg(1, 256, 21);
        for i in 0..20 {
            let w = sample_walk_embedding(0.33, 1.0, 0.1, &c, i).unwrap();
            assert_eq!(w.k_star + 1, w.tau_times.len());
            assert!(w.levels.windows(2).all(|p| (p[1] - p[0]).abs() == 1));
            assert!(w.tau_times.windows(2).all(|p| p[1] > p[0]));
            assert!(*w.tau_times.last().unwrap() <= 1.0);
        }
    }

    #[test]
    fn free_walk_is_symmetric() {
        let s = mc_free_walk_embedding(1.0, 0.2, &cfg(4000, 256, 6)).unwrap();
        assert!(s.up_fraction.within(0.5, 4.0), "{:?}", s.up_fraction);
        // E[tau_1] = h^2, so roughly T / h^2 steps
        assert!(s.mean_steps > 15.0 && s.mean_steps < 30.0, "{}", s.mean_steps);
    }

    #[test]
    fn last_passage_precedes_exit() {
        let lp = mc_last_passage(1.0, 20.0, &cfg(500, 512, 4)).unwrap();
        assert_eq!(lp.samples.len() + lp.censored, 500);
        for (l, e) in lp.samples.iter().zip(&lp.exit_times) {
            assert!(l < e && *l > 0.0);
        }
    }

    #[test]
    fn bessel_samplers_start_and_end() {
        let c = cfg(1, 32, 1);
        for scheme in [BesselScheme::Radial, BesselScheme::Euler] {
            let p = sample_bessel3_bridge(0.0, 1.0, 1.0, scheme, &c, 0).unwrap();
            assert_eq!(p[0], 0.0);
            assert!((p[32] - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_start_outside_band() {
        let spec = BridgeSpec::new(0.5, 0.0, 1.0).unwrap();
        assert!(mc_exit(&spec, &Interval::new(-0.1, 0.1).unwrap(), &cfg(10, 8, 0)).is_err());
    }
}
