use bridge_exit::exit_mean::{
    bessel_exit_mean_delta, bessel_exit_mean_kolmogorov, bm_exit_mean, bridge_exit_mean_band,
    bridge_exit_mean_delta, bridge_exit_mean_kolmogorov, general_diffusion_exit_mean, survival_probability_bridge,
    BridgeSpec, DiffusionModel,
};
use bridge_exit::monte_carlo::{
    mc_bessel_exit, mc_bm_exit, mc_diffusion_exit, mc_exit_position, mc_exit_with, mc_last_passage as simulate_last_passage,
    mc_walk_embedding, ExitStats,
};
use bridge_exit::quadrature::{integrate_semi_infinite, EndpointSubstitution, IntegralResult, QuadConfig};
use bridge_exit::special_functions::{
    delta_with, kolmogorov_cdf, last_passage_cdf, last_passage_density, last_passage_quantile, KernelMethod,
    KolmogorovMethod, SeriesControl,
};
use bridge_exit::walsh::{q_formula_at, tree_vs_gaussian, walsh_integrals, ExitPositionRoute, PayoffSpec};
use bridge_exit::monte_carlo::derive_seed;
use bridge_exit::{BesselScheme, BridgeSampler, Error, Interval, McConfig};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::{Manifest, Table};
use crate::{row, CliError, OutputArgs};

type CmdResult = Result<Table, CliError>;

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {msg}"))
}

fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(flag, format!("{v} must be finite and > 0")))
    }
}

/// `a,b,c`.
fn parse_list(flag: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(flag, format!("cannot parse {s:?}"))))
        .collect()
}

/// `start:stop:n` with `n` evenly spaced points.
fn parse_grid(flag: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = raw.split(':').collect();
    let bad = || usage(flag, format!("expected start:stop:count, got {raw:?}"));
    let [a, b, n] = parts[..] else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// `start:stop:geometric` halves from `start` down to `stop`;
/// `start:stop:n` gives `n` log-spaced points.
fn parse_h_scan(flag: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = raw.split(':').collect();
    let bad = || usage(flag, format!("expected start:stop:geometric or start:stop:count, got {raw:?}"));
    let [a, b, kind] = parts[..] else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if !(a > 0.0 && b > 0.0 && b < a && a.is_finite()) {
        return Err(usage(flag, "requires start > stop > 0"));
    }
    if kind == "geometric" {
        let mut out = vec![a];
        while out[out.len() - 1] * 0.5 >= b * (1.0 - 1e-12) {
            out.push(out[out.len() - 1] * 0.5);
        }
        return Ok(out);
    }
    let n: usize = kind.parse().map_err(|_| bad())?;
    if n < 2 {
        return Err(bad());
    }
    let ratio = (b / a).powf(1.0 / (n - 1) as f64);
    Ok((0..n).map(|i| a * ratio.powi(i as i32)).collect())
}

fn quad(tol: f64) -> QuadConfig {
    QuadConfig::default().with_tolerances(tol, tol)
}

#[derive(Args, Clone, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 512)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Grid-only crossing detection (biased; for comparison).
    #[arg(long)]
    pub no_correction: bool,
    /// Bridge bisection depth per grid step.
    #[arg(long, default_value_t = 10)]
    pub refine_levels: u32,
}

impl McArgs {
    fn config(&self) -> Result<McConfig, CliError> {
        let mut cfg = McConfig::new(self.paths, self.steps, self.seed)?.with_correction(!self.no_correction);
        cfg.refine_levels = self.refine_levels;
        cfg.validate()?;
        Ok(cfg)
    }
}

// -- specfun ----------------------------------------------------------------

#[derive(Subcommand)]
pub enum Specfun {
    /// Kolmogorov CDF by both Poisson-dual series.
    Kolmogorov(KolmogorovArgs),
    /// Density of Brownian motion killed on leaving (-h, h).
    Delta(DeltaArgs),
    /// Last-passage density and CDF.
    LastPassage(LastPassageArgs),
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct KolmogorovArgs {
    #[arg(long, default_value_t = 0.3)]
    pub x_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Images,
    Eigen,
    Auto,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct DeltaArgs {
    /// Comma-separated points in (-h, h).
    #[arg(long, default_value = "0")]
    pub z: String,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Comma-separated times.
    #[arg(long, default_value = "0.1,0.5,1")]
    pub t: String,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: KernelChoice,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LastPassageArgs {
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[arg(long, default_value_t = 0.05)]
    pub t_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Print the integral of the density over (0, inf) instead of a table.
    #[arg(long)]
    pub check_normalization: bool,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn specfun(cmd: Specfun) -> Result<(Table, OutputArgs), CliError> {
    match cmd {
        Specfun::Kolmogorov(a) => Ok((kolmogorov(&a)?, a.output)),
        Specfun::Delta(a) => Ok((delta(&a)?, a.output)),
        Specfun::LastPassage(a) => Ok((last_passage(&a)?, a.output)),
    }
}

fn kolmogorov(a: &KolmogorovArgs) -> CmdResult {
    positive("x-min", a.x_min)?;
    positive("x-max", a.x_max)?;
    if a.x_max < a.x_min {
        return Err(usage("x-max", "must be >= --x-min"));
    }
    if a.points == 0 {
        return Err(usage("points", "must be >= 1"));
    }
    let ctrl = SeriesControl::default();
    let mut t = Table::new(Manifest::new("specfun kolmogorov", a), &["x", "F_alternating", "F_theta", "diff"]);
    let xs = parse_grid("x-min", &format!("{}:{}:{}", a.x_min, a.x_max, a.points))?;
    let mut worst: f64 = 0.0;
    for x in xs {
        let alt = kolmogorov_cdf(x, KolmogorovMethod::Alternating, &ctrl)?;
        let theta = kolmogorov_cdf(x, KolmogorovMethod::Theta, &ctrl)?;
        t.require(alt.converged && theta.converged);
        let diff = alt.value - theta.value;
        worst = worst.max(diff.abs());
        t.push(row![x, alt.value, theta.value, diff]);
    }
    t.note("max_abs_diff", crate::output::shortest(worst));
    Ok(t)
}

fn delta(a: &DeltaArgs) -> CmdResult {
    positive("h", a.h)?;
    let method = match a.method {
        KernelChoice::Images => KernelMethod::Images,
        KernelChoice::Eigen => KernelMethod::Eigen,
        KernelChoice::Auto => KernelMethod::Auto,
    };
    let zs = parse_list("z", &a.z)?;
    let ts = parse_list("t", &a.t)?;
    for &z in &zs {
        if !(z.abs() < a.h) {
            return Err(usage("z", format!("{z} must satisfy |z| < h")));
        }
    }
    for &s in &ts {
        positive("t", s)?;
    }
    let ctrl = SeriesControl::default();
    let mut t = Table::new(Manifest::new("specfun delta", a), &["z", "h", "t", "delta", "tail_bound"]);
    for &z in &zs {
        for &s in &ts {
            let v = delta_with(z, a.h, s, method, &ctrl)?;
            t.require(v.converged);
            t.push(row![z, a.h, s, v.value, v.tail_bound]);
        }
    }
    Ok(t)
}

fn last_passage(a: &LastPassageArgs) -> CmdResult {
    positive("h", a.h)?;
    let ctrl = SeriesControl::default();
    if a.check_normalization {
        let cfg = quad(1e-12).with_substitution(EndpointSubstitution::SqrtBoth);
        let r = integrate_semi_infinite(|s| if s > 0.0 { last_passage_density(s, a.h, &ctrl).unwrap().value } else { 0.0 }, &cfg)?;
        let mut t = Table::new(Manifest::new("specfun last-passage", a), &["integral", "error_estimate", "deviation"]);
        t.require(r.converged);
        t.push(row![r.value, r.error_estimate, r.value - 1.0]);
        eprintln!("integral = {} (deviation {:.2e})", r.value, r.value - 1.0);
        return Ok(t);
    }
    positive("t-min", a.t_min)?;
    positive("t-max", a.t_max)?;
    let ts = parse_grid("t-min", &format!("{}:{}:{}", a.t_min, a.t_max, a.points.max(1)))?;
    let cfg = QuadConfig::default();
    let mut t = Table::new(Manifest::new("specfun last-passage", a), &["t", "density", "cdf"]);
    for s in ts {
        let d = last_passage_density(s, a.h, &ctrl)?;
        t.require(d.converged);
        t.push(row![s, d.value, last_passage_cdf(s, a.h, &cfg)?]);
    }
    Ok(t)
}

// -- exit-mean / limit-scan -------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    Bridge,
    Bessel,
    Bm,
    Diffusion,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// dX = sigma dW.
    Scaled,
    /// dX = kappa (mean - X) dt + sigma dW.
    Ou,
}

#[derive(Args, Clone, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "scaled")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mean: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<DiffusionModel, CliError> {
        Ok(match self.model {
            ModelKind::Scaled => DiffusionModel::scaled_brownian(self.sigma)?,
            ModelKind::Ou => DiffusionModel::ornstein_uhlenbeck(self.kappa, self.mean, self.sigma)?,
        })
    }
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ExitMeanArgs {
    #[arg(long, value_enum, default_value = "bridge")]
    pub process: Process,
    /// Bridge horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Start point (bessel, bm, diffusion).
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    /// Bridge end point.
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    /// Half-width of the band around the start.
    #[arg(long)]
    pub h: Option<f64>,
    /// `start:stop:geometric` or `start:stop:count`.
    #[arg(long)]
    pub h_scan: Option<String>,
    /// Explicit band (bm only).
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[serde(flatten)]
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    /// Cap on adaptive subintervals per integral.
    #[arg(long, default_value_t = 2000)]
    pub max_subdivisions: usize,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

fn h_values(h: Option<f64>, scan: Option<&str>) -> Result<Vec<f64>, CliError> {
    match (h, scan) {
        (Some(_), Some(_)) => Err(usage("h-scan", "give either --h or --h-scan")),
        (Some(h), None) => Ok(vec![positive("h", h)?]),
        (None, Some(s)) => parse_h_scan("h-scan", s),
        (None, None) => Err(usage("h", "one of --h or --h-scan is required")),
    }
}

pub fn exit_mean(a: &ExitMeanArgs) -> CmdResult {
    positive("T", a.horizon)?;
    positive("tol", a.tol)?;
    if a.max_subdivisions == 0 {
        return Err(usage("max-subdivisions", "must be >= 1"));
    }
    let cfg = QuadConfig {
        max_subdivisions: a.max_subdivisions,
        ..quad(a.tol)
    };
    let manifest = Manifest::new("exit-mean", a);
    match a.process {
        Process::Bm => {
            let (lo, hi) = match (a.a, a.b, a.h) {
                (Some(lo), Some(hi), None) => (lo, hi),
                (None, None, Some(h)) => (a.x - positive("h", h)?, a.x + h),
                _ => return Err(usage("a", "bm needs either --a and --b, or --h")),
            };
            if !(lo < a.x && a.x < hi) {
                return Err(usage("x", "must lie strictly inside (a, b)"));
            }
            let mut t = Table::new(manifest, &["x", "a", "b", "mean"]);
            t.push(row![a.x, lo, hi, bm_exit_mean(a.x, lo, hi)?]);
            Ok(t)
        }
        Process::Diffusion => {
            let model = a.model.build()?;
            let mut t = Table::new(manifest, &["h", "mean", "error_estimate", "ratio_h2"]);
            for h in h_values(a.h, a.h_scan.as_deref())? {
                let r = general_diffusion_exit_mean(&model, a.x, h, &cfg)?;
                t.require(r.converged);
                t.push(row![h, r.value, r.error_estimate, r.value / (h * h)]);
            }
            Ok(t)
        }
        Process::Bridge | Process::Bessel => {
            let columns = ["h", "mean_delta", "mean_kolmogorov", "rel_diff", "ratio_h2", "status", "survival_prob"];
            let mut t = Table::new(manifest, &columns);
            for h in h_values(a.h, a.h_scan.as_deref())? {
                let pair = if a.process == Process::Bridge {
                    let spec = BridgeSpec::from_origin(a.y, a.horizon)?;
                    bridge_exit_mean_delta(&spec, h, &cfg).and_then(|d| Ok((d, bridge_exit_mean_kolmogorov(&spec, h, &cfg)?)))
                } else {
                    bessel_exit_mean_delta(a.x, a.y, a.horizon, h, &cfg)
                        .and_then(|d| Ok((d, bessel_exit_mean_kolmogorov(a.x, a.y, a.horizon, h, &cfg)?)))
                };
                match pair {
                    Ok((d, k)) => {
                        t.require(d.converged && k.converged);
                        let rel = (d.value - k.value).abs() / k.value.abs();
                        t.push(row![h, d.value, k.value, rel, d.value / (h * h), "OK", 0.0]);
                    }
                    Err(Error::InfiniteMean { .. }) => {
                        let survival = if a.process == Process::Bridge {
                            survival_probability_bridge(&BridgeSpec::from_origin(a.y, a.horizon)?, h)?
                        } else {
                            f64::NAN
                        };
                        t.push(row![h, f64::INFINITY, f64::INFINITY, f64::NAN, f64::INFINITY, "INFINITE_MEAN", survival]);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(t)
        }
    }
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LimitScanArgs {
    #[arg(long, value_enum, default_value = "bridge")]
    pub process: Process,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    #[arg(long, default_value = "0.4:0.025:geometric")]
    pub h_scan: String,
    #[serde(flatten)]
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn limit_scan(a: &LimitScanArgs) -> CmdResult {
    positive("T", a.horizon)?;
    positive("tol", a.tol)?;
    let cfg = quad(a.tol);
    let hs = parse_h_scan("h-scan", &a.h_scan)?;
    let model = a.model.build()?;
    let mut t = Table::new(Manifest::new("limit-scan", a), &["h", "mean", "ratio_h2", "error_estimate"]);
    for h in hs {
        let r: IntegralResult = match a.process {
            Process::Bridge => bridge_exit_mean_delta(&BridgeSpec::from_origin(a.y, a.horizon)?, h, &cfg)?,
            Process::Bessel => bessel_exit_mean_delta(a.x, a.y, a.horizon, h, &cfg)?,
            Process::Diffusion => general_diffusion_exit_mean(&model, a.x, h, &cfg)?,
            Process::Bm => IntegralResult {
                value: h * h,
                error_estimate: 0.0,
                converged: true,
                evaluations: 0,
            },
        };
        t.require(r.converged);
        t.push(row![h, r.value, r.value / (h * h), r.error_estimate]);
    }
    Ok(t)
}

// -- Monte Carlo ------------------------------------------------------------

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    Conditional,
    TimeChange,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Radial,
    Euler,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct McExitArgs {
    #[arg(long, value_enum, default_value = "bridge")]
    pub process: Process,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    /// Band (x - h, x + h) unless --a/--b are given.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Simulation horizon for unpinned processes, in units of the squared band width.
    #[arg(long, default_value_t = 20.0)]
    pub horizon_units: f64,
    #[arg(long, value_enum, default_value = "conditional")]
    pub sampler: SamplerChoice,
    #[arg(long, value_enum, default_value = "radial")]
    pub scheme: SchemeChoice,
    #[serde(flatten)]
    #[command(flatten)]
    pub model: ModelArgs,
    #[serde(flatten)]
    #[command(flatten)]
    pub mc: McArgs,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

fn band_of(a: &McExitArgs) -> Result<Interval, CliError> {
    let band = match (a.a, a.b, a.h) {
        (Some(lo), Some(hi), None) => Interval::new(lo, hi)?,
        (None, None, Some(h)) => Interval::new(a.x - positive("h", h)?, a.x + h)?,
        _ => return Err(usage("h", "give either --h or both --a and --b")),
    };
    if !band.contains(a.x) {
        return Err(usage("x", "must lie strictly inside the band"));
    }
    Ok(band)
}

fn push_estimate(t: &mut Table, name: &str, est: bridge_exit::Estimate, reference: Option<f64>) {
    let (r, z) = match reference {
        Some(r) => (r, est.z_score(r)),
        None => (f64::NAN, f64::NAN),
    };
    t.push(row![name, est.mean, est.se, r, z]);
}

pub fn mc_exit(a: &McExitArgs) -> CmdResult {
    positive("T", a.horizon)?;
    let cfg = a.mc.config()?;
    let band = band_of(a)?;
    let mut t = Table::new(Manifest::new("mc-exit", a), &["quantity", "estimate", "se", "reference", "z"]);
    let quad_cfg = quad(1e-11);
    let sim_horizon = positive("horizon-units", a.horizon_units)? * band.width() * band.width() / 4.0;
    let stats: ExitStats;
    let mut ref_time = None;
    let mut ref_survival = None;
    match a.process {
        Process::Bridge => {
            let spec = BridgeSpec::new(a.x, a.y, a.horizon)?;
            let sampler = match a.sampler {
                SamplerChoice::Conditional => BridgeSampler::Conditional,
                SamplerChoice::TimeChange => BridgeSampler::TimeChange,
            };
            stats = mc_exit_with(&spec, &band, sampler, &cfg)?;
            if band.contains(a.y) {
                if a.x == 0.0 && band.lo == -band.hi {
                    ref_survival = Some(survival_probability_bridge(&spec, band.hi)?);
                }
            } else {
                let r = bridge_exit_mean_band(&spec, &band, &quad_cfg)?;
                t.require(r.converged);
                ref_time = Some(r.value);
                ref_survival = Some(0.0);
            }
            let pos = mc_exit_position(&spec, &band, &cfg)?;
            push_estimate(&mut t, "exit_position_drift_integral", pos.drift_integral, None);
        }
        Process::Bessel => {
            let scheme = match a.scheme {
                SchemeChoice::Radial => BesselScheme::Radial,
                SchemeChoice::Euler => BesselScheme::Euler,
            };
            stats = mc_bessel_exit(a.x, a.y, a.horizon, &band, scheme, &cfg)?;
            if a.x > 0.0 && (a.y - a.x).abs() >= band.hi - a.x && band.hi - a.x == a.x - band.lo {
                let r = bessel_exit_mean_delta(a.x, a.y, a.horizon, band.hi - a.x, &quad_cfg)?;
                t.require(r.converged);
                ref_time = Some(r.value);
            }
        }
        Process::Bm => {
            stats = mc_bm_exit(a.x, &band, sim_horizon, &cfg)?;
            ref_time = Some(bm_exit_mean(a.x, band.lo, band.hi)?);
        }
        Process::Diffusion => {
            let model = a.model.build()?;
            let h = band.hi - a.x;
            if (a.x - band.lo - h).abs() > 1e-12 * h {
                return Err(usage("a", "diffusion bands must be symmetric; use --h"));
            }
            stats = mc_diffusion_exit(&model, a.x, h, sim_horizon, &cfg)?;
            let r = general_diffusion_exit_mean(&model, a.x, h, &quad_cfg)?;
            t.require(r.converged);
            ref_time = Some(r.value);
        }
    }
    push_estimate(&mut t, "mean_exit_time", stats.exit_time(), ref_time);
    push_estimate(&mut t, "exit_position", stats.exit_position(), None);
    push_estimate(&mut t, "prob_upper_exit", stats.prob_upper_exit, None);
    push_estimate(&mut t, "prob_lower_exit", stats.prob_lower_exit, None);
    push_estimate(&mut t, "prob_no_exit", stats.prob_no_exit, ref_survival);
    t.note("n_exited", stats.n_exited);
    t.note("coarse_grid", stats.coarse_grid);
    if stats.coarse_grid {
        eprintln!("warning: grid step is coarse relative to the band");
    }
    if let Some(r) = ref_time {
        let e = stats.exit_time();
        eprintln!("mean exit time {:.6} +- {:.6}, quadrature {r:.6}, z = {:.2}", e.mean, e.se, e.z_score(r));
    }
    Ok(t)
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct McQfunArgs {
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.25)]
    pub h: f64,
    /// `start:stop:count`.
    #[arg(long, default_value = "0.05:0.45:9")]
    pub x_grid: String,
    #[serde(flatten)]
    #[command(flatten)]
    pub mc: McArgs,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn mc_qfun(a: &McQfunArgs) -> CmdResult {
    positive("T", a.horizon)?;
    positive("h", a.h)?;
    let cfg = a.mc.config()?;
    let xs = parse_grid("x-grid", &a.x_grid)?;
    let mut t = Table::new(Manifest::new("mc-qfun", a), &["x", "q_mc", "se", "up_fraction", "mean_steps"]);
    for (i, x) in xs.into_iter().enumerate() {
        let w = mc_walk_embedding(x, a.horizon, a.h, &cfg.with_seed(derive_seed(cfg.seed, i as u64)))?;
        t.push(row![x, w.q.mean, w.q.se, w.up_fraction.mean, w.mean_steps]);
    }
    Ok(t)
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct McLastPassageArgs {
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Simulation horizon; paths still inside are censored.
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    /// Comma-separated probabilities for the quantile table.
    #[arg(long, default_value = "0.05,0.1,0.25,0.5,0.75,0.9,0.95")]
    pub probs: String,
    #[serde(flatten)]
    #[command(flatten)]
    pub mc: McArgs,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn mc_last_passage(a: &McLastPassageArgs) -> CmdResult {
    positive("h", a.h)?;
    positive("horizon", a.horizon)?;
    let probs = parse_list("probs", &a.probs)?;
    if let Some(&p) = probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(usage("probs", format!("{p} must lie in (0, 1)")));
    }
    let cfg = a.mc.config()?;
    let lp = simulate_last_passage(a.h, a.horizon, &cfg)?;
    let quad_cfg = QuadConfig::default();
    let mut t = Table::new(Manifest::new("mc-last-passage", a), &["p", "quantile", "empirical_cdf", "se", "z"]);
    for p in probs {
        let s = last_passage_quantile(p, a.h, &quad_cfg)?;
        let e = lp.empirical_cdf(s);
        t.push(row![p, s, e.mean, e.se, e.z_score(p)]);
    }
    t.note("censored", lp.censored);
    Ok(t)
}

// -- Walsh ------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteChoice {
    Mc,
    Quadrature,
}

fn route(choice: RouteChoice, mc: &McArgs, tol: f64) -> Result<ExitPositionRoute, CliError> {
    Ok(match choice {
        RouteChoice::Mc => ExitPositionRoute::MonteCarlo(mc.config()?),
        RouteChoice::Quadrature => ExitPositionRoute::Quadrature(quad(positive("tol", tol)?)),
    })
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct QfunArgs {
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.25)]
    pub h: f64,
    #[arg(long, default_value = "0.05:0.45:9")]
    pub x_grid: String,
    /// How E[B at exit] is computed inside the formula.
    #[arg(long, value_enum, default_value = "mc")]
    pub route: RouteChoice,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[serde(flatten)]
    #[command(flatten)]
    pub mc: McArgs,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn qfun(a: &QfunArgs) -> CmdResult {
    positive("T", a.horizon)?;
    positive("h", a.h)?;
    let r = route(a.route, &a.mc, a.tol)?;
    let cfg = a.mc.config()?;
    let xs = parse_grid("x-grid", &a.x_grid)?;
    let columns = ["x", "dist_term", "correction", "q_formula", "q_formula_se", "q_mc", "q_mc_se", "z"];
    let mut t = Table::new(Manifest::new("qfun", a), &columns);
    for (i, x) in xs.into_iter().enumerate() {
        let f = q_formula_at(x, a.horizon, a.h, &r, i as u64)?;
        let w = mc_walk_embedding(x, a.horizon, a.h, &cfg.with_seed(derive_seed(cfg.seed ^ 0x9e37, i as u64)))?;
        let z = (f.q - w.q.mean) / (f.se * f.se + w.q.se * w.q.se).sqrt();
        t.push(row![x, f.dist_term, f.correction, f.q, f.se, w.q.mean, w.q.se, z]);
    }
    Ok(t)
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct WalshScanArgs {
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value = "0.2,0.1,0.05")]
    pub h_list: String,
    #[arg(long, value_enum, default_value = "quadrature")]
    pub route: RouteChoice,
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[serde(flatten)]
    #[command(flatten)]
    pub mc: McArgs,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn walsh_scan(a: &WalshScanArgs) -> CmdResult {
    positive("T", a.horizon)?;
    let hs = parse_list("h-list", &a.h_list)?;
    for &h in &hs {
        positive("h-list", h)?;
    }
    let r = route(a.route, &a.mc, a.tol)?;
    let columns = [
        "h",
        "corollary_integral",
        "corollary_se",
        "ratio_h2",
        "eq38_term",
        "eq38_term_se",
        "ratio_h3",
        "tail_bound",
    ];
    let mut t = Table::new(Manifest::new("walsh-scan", a), &columns);
    for h in hs {
        eprintln!("walsh-scan: h = {h}");
        let w = walsh_integrals(a.horizon, h, &r)?;
        t.push(row![
            h,
            w.corollary.mean,
            w.corollary.se,
            w.corollary_ratio,
            w.parity_residual.mean,
            w.parity_residual.se,
            w.parity_residual_ratio,
            w.tail_bound
        ]);
    }
    Ok(t)
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffChoice {
    Linear,
    Quadratic,
    Call,
    Kinked,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TreePriceArgs {
    #[arg(long, value_enum, default_value = "call")]
    pub payoff: PayoffChoice,
    #[arg(long, default_value_t = 0.0)]
    pub strike: f64,
    #[arg(long, default_value_t = 0.0)]
    pub knot: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value = "100,400,1600")]
    pub n_list: String,
    #[serde(skip)]
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn tree_price(a: &TreePriceArgs) -> CmdResult {
    positive("T", a.horizon)?;
    let payoff = match a.payoff {
        PayoffChoice::Linear => PayoffSpec::Linear,
        PayoffChoice::Quadratic => PayoffSpec::Quadratic,
        PayoffChoice::Call => PayoffSpec::Call { strike: a.strike },
        PayoffChoice::Kinked => PayoffSpec::Kinked { knot: a.knot },
    };
    let mut t = Table::new(Manifest::new("tree-price", a), &["n", "h", "tree_value", "gaussian_value", "error"]);
    for raw in a.n_list.split(',') {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| usage("n-list", format!("{raw:?} is not a positive integer")))?;
        let c = tree_vs_gaussian(&payoff, a.horizon, n)?;
        t.push(row![n, c.h, c.tree_value, c.gaussian_value, c.error]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_scan_halves_to_stop() {
        let hs = parse_h_scan("h-scan", "0.4:0.025:geometric").unwrap();
        assert_eq!(hs, vec![0.4, 0.2, 0.1, 0.05, 0.025]);
    }

    #[test]
    fn counted_scan_is_log_spaced() {
        let hs = parse_h_scan("h-scan", "1:0.01:3").unwrap();
        assert_eq!(hs.len(), 3);
        assert!((hs[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let xs = parse_grid("x-grid", "0.05:0.45:9").unwrap();
        assert_eq!(xs.len(), 9);
        assert_eq!(xs[0], 0.05);
        assert_eq!(xs[8], 0.45);
    }

    #[test]
    fn bad_specs_name_the_flag() {
        for (flag, raw) in [("h-scan", "0.1:0.4:geometric"), ("h-scan", "a:b:c"), ("x-grid", "1:2")] {
            let err = if flag == "h-scan" { parse_h_scan(flag, raw) } else { parse_grid(flag, raw) };
            match err {
                Err(CliError::Usage(msg)) => assert!(msg.starts_with(&format!("--{flag}")), "{msg}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
