//! Quadrature-grade first-exit-time means for Brownian motion, the Brownian
//! bridge, the Bessel(3) bridge and general scalar diffusions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, require_positive, Error, Result};
use crate::interval::Interval;
use crate::quadrature::{integrate_unchecked, EndpointSubstitution, IntegralResult, QuadConfig};
use crate::special_functions::{
    delta_unchecked, gauss_unchecked, killed_band_unchecked, kolmogorov_unchecked, KernelMethod, KolmogorovMethod,
    SeriesControl,
};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Pinned path from `start` to `end` over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub start: f64,
    pub end: f64,
    pub horizon: f64,
}

impl BridgeSpec {
    pub fn new(start: f64, end: f64, horizon: f64) -> Result<Self> {
        require_finite("x", start)?;
        require_finite("y", end)?;
        require_positive("T", horizon)?;
        Ok(Self { start, end, horizon })
    }

    /// Bridge from 0 to `end`.
    pub fn from_origin(end: f64, horizon: f64) -> Result<Self> {
        Self::new(0.0, end, horizon)
    }
}

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `dX = b(X) dt + a(X) dW` on an open state interval.
#[derive(Clone)]
pub struct DiffusionModel {
    drift: Coefficient,
    diffusion: Coefficient,
    pub state: Interval,
}

impl std::fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionModel").field("state", &self.state).finish_non_exhaustive()
    }
}

impl DiffusionModel {
    /// The caller guarantees `a > 0` and continuity of both coefficients on `state`.
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        state: Interval,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            state,
        }
    }

    pub fn brownian() -> Self {
        Self::scaled_brownian(1.0).expect("unit volatility is valid")
    }

    /// `dX = sigma dW`.
    pub fn scaled_brownian(sigma: f64) -> Result<Self> {
        require_positive("sigma", sigma)?;
        Ok(Self::new(|_| 0.0, move |_| sigma, whole_line()))
    }

    /// `dX = kappa (mean - X) dt + sigma dW`.
    pub fn ornstein_uhlenbeck(kappa: f64, mean: f64, sigma: f64) -> Result<Self> {
        require_finite("kappa", kappa)?;
        require_finite("mean", mean)?;
        require_positive("sigma", sigma)?;
        Ok(Self::new(move |x| kappa * (mean - x), move |_| sigma, whole_line()))
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> f64 {
        (self.diffusion)(x)
    }
}

fn whole_line() -> Interval {
    Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    }
}

/// One row of a small-band scan: `ratio = mean / h^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitScanRow {
    pub h: f64,
    pub mean: f64,
    pub ratio: f64,
}

/// `E_x[T_(a,b)] = (b - x)(x - a)` for standard Brownian motion.
pub fn bm_exit_mean(x: f64, a: f64, b: f64) -> Result<f64> {
    let band = Interval::new(a, b)?;
    if !(band.contains(x) && a.is_finite() && b.is_finite()) {
        return Err(domain("x", x, "must lie inside a finite band (a, b)"));
    }
    Ok((b - x) * (x - a))
}

fn series() -> SeriesControl {
    SeriesControl::default()
}

fn check_symmetric_bridge(spec: &BridgeSpec, h: f64) -> Result<()> {
    require_positive("h", h)?;
    if spec.start != 0.0 {
        return Err(domain("x", spec.start, "bridge must start at 0"));
    }
    if spec.end.abs() < h {
        return Err(Error::InfiniteMean {
            end: spec.end,
            lo: -h,
            hi: h,
        });
    }
    Ok(())
}

/// `ln(p_tau(z, y) / p_T(x, y))`.
#[inline]
fn log_gauss_ratio(tau: f64, z: f64, horizon: f64, x: f64, y: f64) -> f64 {
    0.5 * (horizon / tau).ln() - (y - z) * (y - z) / (2.0 * tau) + (y - x) * (y - x) / (2.0 * horizon)
}

/// `(p_tau(z,y) - p_tau(z,-y)) / (p_T(x,y) - p_T(x,-y))` for positive `z, x, y`.
#[inline]
fn bessel_kernel_ratio(tau: f64, z: f64, horizon: f64, x: f64, y: f64) -> f64 {
    let num = -(-2.0 * z * y / tau).exp_m1();
    let den = -(-2.0 * x * y / horizon).exp_m1();
    log_gauss_ratio(tau, z, horizon, x, y).exp() * num / den
}

fn inner_config(cfg: &QuadConfig, horizon: f64) -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-2 * cfg.abs_tol / horizon,
        rel_tol: 1e-2 * cfg.rel_tol,
        endpoint_substitution: EndpointSubstitution::None,
        ..*cfg
    }
}

/// `int_0^T int_lo^hi kernel(t, z) dz dt` with the inner integral split at
/// `split`; inner errors are folded into the reported estimate.
fn iterated(
    horizon: f64,
    lo: f64,
    hi: f64,
    split: f64,
    cfg: &QuadConfig,
    kernel: impl Fn(f64, f64) -> f64,
) -> IntegralResult {
    let inner = inner_config(cfg, horizon);
    let mut inner_err: f64 = 0.0;
    let mut inner_ok = true;
    let mut inner_evals = 0;
    let outer_cfg = cfg.with_substitution(EndpointSubstitution::SqrtBoth);
    let outer = integrate_unchecked(
        |t| {
            let piece = |a: f64, b: f64| integrate_unchecked(|z| kernel(t, z), a, b, &inner);
            let r = if lo < split && split < hi {
                piece(lo, split).add(piece(split, hi))
            } else {
                piece(lo, hi)
            };
            inner_err = inner_err.max(r.error_estimate);
            inner_ok &= r.converged;
            inner_evals += r.evaluations;
            r.value
        },
        0.0,
        horizon,
        &outer_cfg,
    );
    IntegralResult {
        value: outer.value,
        error_estimate: outer.error_estimate + horizon * inner_err,
        converged: outer.converged && inner_ok,
        evaluations: outer.evaluations + inner_evals,
    }
}

/// Bridge from 0 to `y`, mean exit time from `(-h, h)` via the double integral
/// of `p_{T-t}(z,y)/p_T(0,y) * Delta(z,h,t)`.
pub fn bridge_exit_mean_delta(spec: &BridgeSpec, h: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_symmetric_bridge(spec, h)?;
    let (horizon, y) = (spec.horizon, spec.end);
    let ctrl = series();
    Ok(iterated(horizon, -h, h, 0.0, cfg, |t, z| {
        let tau = horizon - t;
        let d = delta_unchecked(z, h, t, KernelMethod::Auto, &ctrl).value;
        if d == 0.0 {
            return 0.0;
        }
        d * log_gauss_ratio(tau, z, horizon, 0.0, y).exp()
    }))
}

/// Same quantity as [`bridge_exit_mean_delta`] via the single integral
/// `h int_0^T p_{T-t}(0,y)/p_T(0,y) F(h/sqrt t)/sqrt(2 pi t) dt`.
pub fn bridge_exit_mean_kolmogorov(spec: &BridgeSpec, h: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_symmetric_bridge(spec, h)?;
    let (horizon, y) = (spec.horizon, spec.end);
    Ok(kolmogorov_route(horizon, h, cfg, |tau| {
        log_gauss_ratio(tau, 0.0, horizon, 0.0, y).exp()
    }))
}

fn kolmogorov_route(horizon: f64, h: f64, cfg: &QuadConfig, weight: impl Fn(f64) -> f64) -> IntegralResult {
    let ctrl = series();
    let outer_cfg = cfg.with_substitution(EndpointSubstitution::SqrtBoth);
    integrate_unchecked(
        |t| {
            let f = kolmogorov_unchecked(h / t.sqrt(), KolmogorovMethod::Auto, &ctrl).value;
            if f == 0.0 {
                return 0.0;
            }
            h * weight(horizon - t) * f / (SQRT_2PI * t.sqrt())
        },
        0.0,
        horizon,
        &outer_cfg,
    )
}

/// `h int_0^T p_{T-t}(0,y) F(h/sqrt t)/sqrt(2 pi t) dt` without the bridge
/// normalisation; its Laplace transform in `T` is known in closed form.
pub fn kolmogorov_convolution(horizon: f64, y: f64, h: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    require_positive("T", horizon)?;
    require_positive("h", h)?;
    require_finite("y", y)?;
    Ok(kolmogorov_route(horizon, h, cfg, |tau| gauss_unchecked(tau, 0.0, y)))
}

fn check_bessel(x: f64, y: f64, horizon: f64, h: f64) -> Result<()> {
    require_positive("h", h)?;
    require_positive("T", horizon)?;
    require_positive("y", y)?;
    require_finite("x", x)?;
    if x <= h {
        return Err(domain("x", x, "requires x > h"));
    }
    if (x - h) < y && y < (x + h) {
        return Err(Error::InfiniteMean {
            end: y,
            lo: x - h,
            hi: x + h,
        });
    }
    Ok(())
}

/// Bessel(3) bridge from `x` to `y`, mean exit time from `(x-h, x+h)` via
/// the `Delta` double integral.
pub fn bessel_exit_mean_delta(x: f64, y: f64, horizon: f64, h: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_bessel(x, y, horizon, h)?;
    let ctrl = series();
    Ok(iterated(horizon, -h, h, 0.0, cfg, |t, alpha| {
        let d = delta_unchecked(alpha, h, t, KernelMethod::Auto, &ctrl).value;
        if d == 0.0 {
            return 0.0;
        }
        d * bessel_kernel_ratio(horizon - t, x + alpha, horizon, x, y)
    }))
}

/// Bessel(3) bridge mean exit time via the Kolmogorov single integral.
pub fn bessel_exit_mean_kolmogorov(x: f64, y: f64, horizon: f64, h: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_bessel(x, y, horizon, h)?;
    Ok(kolmogorov_route(horizon, h, cfg, |tau| {
        bessel_kernel_ratio(tau, x, horizon, x, y)
    }))
}

fn check_band_bridge(spec: &BridgeSpec, band: &Interval) -> Result<()> {
    if !(band.lo.is_finite() && band.hi.is_finite() && band.contains(spec.start)) {
        return Err(domain("x", spec.start, "must lie inside a finite band"));
    }
    if band.contains(spec.end) {
        return Err(Error::InfiniteMean {
            end: spec.end,
            lo: band.lo,
            hi: band.hi,
        });
    }
    Ok(())
}

/// Mean exit time of a Brownian bridge from an arbitrary band `(a, b)`
/// containing its start, using the killed transition density on the band.
pub fn bridge_exit_mean_band(spec: &BridgeSpec, band: &Interval, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_band_bridge(spec, band)?;
    let BridgeSpec { start, end, horizon } = *spec;
    let ctrl = series();
    Ok(iterated(horizon, band.lo, band.hi, start, cfg, |t, z| {
        let q = killed_band_unchecked(t, start, z, band.lo, band.hi, KernelMethod::Auto, &ctrl).value;
        if q == 0.0 {
            return 0.0;
        }
        q * log_gauss_ratio(horizon - t, z, horizon, start, end).exp()
    }))
}

/// Mean exit position `E[B_T(a,b)]` of a Brownian bridge, from the optional
/// stopping identity `E[B_tau] = x + E int_0^tau (y - B_s)/(T - s) ds`.
pub fn bridge_exit_position_mean(spec: &BridgeSpec, band: &Interval, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_band_bridge(spec, band)?;
    let BridgeSpec { start, end, horizon } = *spec;
    let ctrl = series();
    let drift = iterated(horizon, band.lo, band.hi, start, cfg, |t, z| {
        let tau = horizon - t;
        let q = killed_band_unchecked(t, start, z, band.lo, band.hi, KernelMethod::Auto, &ctrl).value;
        if q == 0.0 {
            return 0.0;
        }
        q * log_gauss_ratio(tau, z, horizon, start, end).exp() * (end - z) / tau
    });
    Ok(IntegralResult {
        value: start + drift.value,
        ..drift
    })
}

/// Mean exit time of a general diffusion from `(x0 - h, x0 + h)` via the
/// Green kernel assembled from scale and speed densities.
pub fn general_diffusion_exit_mean(
    model: &DiffusionModel,
    x0: f64,
    h: f64,
    cfg: &QuadConfig,
) -> Result<IntegralResult> {
    cfg.validate()?;
    require_positive("h", h)?;
    require_finite("x0", x0)?;
    let (lo, hi) = (x0 - h, x0 + h);
    if !(model.state.lo < lo && hi < model.state.hi) {
        return Err(domain("h", h, "band must lie inside the state interval"));
    }
    let tight = QuadConfig {
        abs_tol: 1e-3 * cfg.abs_tol,
        rel_tol: 1e-3 * cfg.rel_tol,
        endpoint_substitution: EndpointSubstitution::None,
        ..*cfg
    };
    let twice_drift_ratio = |v: f64| {
        let a = model.diffusion(v);
        2.0 * model.drift(v) / (a * a)
    };
    // B(u) = int_{x0}^u 2b/a^2, scale derivative exp(-B), speed density 2 exp(B)/a^2.
    let big_b = |u: f64| signed_integral(&twice_drift_ratio, x0, u, &tight);
    let scale = |u: f64| signed_integral(&|v| (-big_b(v)).exp(), x0, u, &tight);
    let speed = |u: f64| {
        let a = model.diffusion(u);
        2.0 * big_b(u).exp() / (a * a)
    };
    let s_plus = scale(hi);
    let s_minus = scale(lo);
    let left = integrate_unchecked(|u| (scale(u) - s_minus) * speed(u), lo, x0, cfg);
    let right = integrate_unchecked(|u| (s_plus - scale(u)) * speed(u), x0, hi, cfg);
    let span = s_plus - s_minus;
    Ok(left.scale(s_plus / span).add(right.scale(-s_minus / span)))
}

fn signed_integral(f: &dyn Fn(f64) -> f64, from: f64, to: f64, cfg: &QuadConfig) -> f64 {
    if from == to {
        0.0
    } else if from < to {
        integrate_unchecked(f, from, to, cfg).value
    } else {
        -integrate_unchecked(f, to, from, cfg).value
    }
}

/// Evaluates `evaluator(h)` along a strictly decreasing `h_list`.
pub fn limit_scan(evaluator: impl Fn(f64) -> Result<f64>, h_list: &[f64]) -> Result<Vec<LimitScanRow>> {
    if h_list.is_empty() {
        return Err(Error::Config("h_list is empty".into()));
    }
    for w in h_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(domain("h_list", w[1], "must be strictly decreasing"));
        }
    }
    h_list
        .iter()
        .map(|&h| {
            require_positive("h", h)?;
            let mean = evaluator(h)?;
            Ok(LimitScanRow {
                h,
                mean,
                ratio: mean / (h * h),
            })
        })
        .collect()
}

/// Halving sequence starting at `min(h_max, |y|) / 2`, so every entry keeps
/// `|y| >= h`.
pub fn default_h_list(h_max: f64, y: f64, count: usize) -> Result<Vec<f64>> {
    require_positive("h_max", h_max)?;
    let start = 0.5 * h_max.min(y.abs());
    require_positive("min(h_max, |y|)", start)?;
    Ok((0..count).map(|j| start * 0.5f64.powi(j as i32)).collect())
}

/// `P(bridge from 0 to y of length T stays in (-h, h))`, as `q_T(0,y)/p_T(0,y)`.
pub fn survival_probability_bridge(spec: &BridgeSpec, h: f64) -> Result<f64> {
    require_positive("h", h)?;
    if spec.start != 0.0 {
        return Err(domain("x", spec.start, "bridge must start at 0"));
    }
    if spec.end.abs() >= h {
        return Ok(0.0);
    }
    let q = killed_band_unchecked(spec.horizon, 0.0, spec.end, -h, h, KernelMethod::Auto, &series()).value;
    Ok((q / gauss_unchecked(spec.horizon, 0.0, spec.end)).clamp(0.0, 1.0))
}

/// Upper bound on the mean exit time of a bridge from 0 to `y` out of
/// `(a, b)`, `a < 0 < b`, `y` outside the band.
pub fn exit_time_bound(a: f64, b: f64, y: f64, horizon: f64) -> Result<f64> {
    check_lemma_band(a, b, y)?;
    let bound = if y >= b {
        4.0 * b * (a.abs() + y / 2.0)
    } else {
        4.0 * a.abs() * (b + y.abs() / 2.0)
    };
    Ok(bound.min(horizon))
}

/// Upper bound on `|E[B at exit]|` given the mean exit time.
pub fn exit_position_bound(a: f64, b: f64, y: f64, horizon: f64, mean_exit_time: f64) -> Result<f64> {
    check_lemma_band(a, b, y)?;
    require_positive("T", horizon)?;
    Ok(mean_exit_time / horizon * (2.0 * a.abs().max(b) + y.abs() + 3.0 * (2.0 * horizon).sqrt()))
}

fn check_lemma_band(a: f64, b: f64, y: f64) -> Result<()> {
    if !(a < 0.0 && 0.0 < b) {
        return Err(domain("a", a, "requires a < 0 < b"));
    }
    if a < y && y < b {
        return Err(domain("y", y, "must lie outside (a, b)"));
    }
    Ok(())
}
