//! Closed-form densities, theta-type series and kernels for Brownian motion
//! killed on leaving a band.
//!
//! Every series evaluation returns a [`SeriesValue`] carrying the truncation
//! bound it stopped on. Alternating series are bounded by the first omitted
//! term; positive series by a geometric majorant of the omitted tail.
//! Terms are summed in order of increasing magnitude.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, require_positive, Result};
use crate::quadrature::{integrate_unchecked, EndpointSubstitution, QuadConfig};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Truncation contract for series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    /// Target bound on the omitted tail, in the units of the returned value.
    pub abs_tol: f64,
    /// Hard cap on the number of evaluated terms.
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            max_terms: 200,
        }
    }
}

impl SeriesControl {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        require_positive("abs_tol", abs_tol)?;
        if max_terms == 0 {
            return Err(domain("max_terms", 0.0, "must be >= 1"));
        }
        Ok(Self { abs_tol, max_terms })
    }
}

/// A truncated series together with the bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Bound on the omitted tail (same units as `value`).
    pub tail_bound: f64,
    pub terms: usize,
    /// `false` when `max_terms` ran out before the tail bound met `abs_tol`.
    pub converged: bool,
}

impl SeriesValue {
    fn exact(value: f64) -> Self {
        Self {
            value,
            tail_bound: 0.0,
            terms: 0,
            converged: true,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            tail_bound: self.tail_bound * factor.abs(),
            ..self
        }
    }
}

/// Which of the two (Poisson-dual) series to use for the Kolmogorov function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KolmogorovMethod {
    /// `sum_m (-1)^m exp(-2 m^2 x^2)`, fast for large `x`.
    Alternating,
    /// `(sqrt(2 pi)/x) sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))`, fast for small `x`.
    Theta,
    /// Theta below `x = 1`, alternating above.
    Auto,
}

/// Which representation to use for killed Brownian transition densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    /// Method of images: Gaussian sums, fast for small times.
    Images,
    /// Sine eigenfunction expansion, fast for large times.
    Eigen,
    /// Images while `t <= width^2 / 2`, eigenfunctions beyond.
    Auto,
}

#[derive(Clone, Copy)]
enum Tail {
    Alternating,
    Geometric,
}

/// Sums `sign(j) * exp(-exponent(j))` over all integers `j`.
///
/// `exponent` must be convex in `j` with its minimum at (or next to)
/// `center`. Each side is walked outward until its tail bound drops below
/// half of `tol`.
fn lattice_sum(
    center: i64,
    exponent: impl Fn(i64) -> f64,
    sign: impl Fn(i64) -> f64,
    tail: Tail,
    tol: f64,
    max_terms: usize,
) -> SeriesValue {
    let mut terms = Vec::with_capacity(32);
    terms.push(sign(center) * (-exponent(center)).exp());
    let mut bounds = [f64::INFINITY; 2];
    let mut done = [false; 2];
    let mut k = 1i64;
    while !(done[0] && done[1]) && terms.len() < max_terms {
        for (side, dir) in [(0usize, -1i64), (1, 1)] {
            if done[side] || terms.len() >= max_terms {
                continue;
            }
            let j = center + dir * k;
            let e = exponent(j);
            terms.push(sign(j) * (-e).exp());
            let e_next = exponent(j + dir);
            let next = (-e_next).exp();
            let bound = if next == 0.0 {
                0.0
            } else {
                match tail {
                    Tail::Alternating => next,
                    Tail::Geometric => {
                        let ratio = (-(exponent(j + 2 * dir) - e_next)).exp();
                        if ratio < 1.0 {
                            next / (1.0 - ratio)
                        } else {
                            f64::INFINITY
                        }
                    }
                }
            };
            bounds[side] = bound;
            // the bound is only meaningful once the terms decay outward
            if e_next >= e && bound <= 0.5 * tol {
                done[side] = true;
            }
        }
        k += 1;
    }
    let tail_bound = bounds[0] + bounds[1];
    SeriesValue {
        value: sum_by_magnitude(&mut terms),
        tail_bound,
        terms: terms.len(),
        converged: done[0] && done[1],
    }
}

fn sum_by_magnitude(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    terms.iter().sum()
}

/// Standard Brownian transition density `p_t(x, y)`.
pub fn gauss_density(t: f64, x: f64, y: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_finite("x", x)?;
    require_finite("y", y)?;
    Ok(gauss_unchecked(t, x, y))
}

#[inline]
pub(crate) fn gauss_unchecked(t: f64, x: f64, y: f64) -> f64 {
    let d = y - x;
    (-d * d / (2.0 * t)).exp() / (SQRT_2PI * t.sqrt())
}

/// Kolmogorov distribution function `F(x) = P(sup |standard bridge| <= x)`.
pub fn kolmogorov_cdf(x: f64, method: KolmogorovMethod, ctrl: &SeriesControl) -> Result<SeriesValue> {
    require_positive("x", x)?;
    Ok(kolmogorov_unchecked(x, method, ctrl))
}

pub(crate) fn kolmogorov_unchecked(x: f64, method: KolmogorovMethod, ctrl: &SeriesControl) -> SeriesValue {
    let method = match method {
        KolmogorovMethod::Auto if x < 1.0 => KolmogorovMethod::Theta,
        KolmogorovMethod::Auto => KolmogorovMethod::Alternating,
        m => m,
    };
    let v = match method {
        KolmogorovMethod::Alternating => {
            let c = 2.0 * x * x;
            lattice_sum(
                0,
                |m| c * (m * m) as f64,
                alternating_sign,
                Tail::Alternating,
                ctrl.abs_tol,
                ctrl.max_terms,
            )
        }
        _ => {
            // (sqrt(2 pi) / x) * sum_{k>=1} = (sqrt(2 pi) / 2x) * sum_{j in Z} over (2j-1)^2
            let c = PI * PI / (8.0 * x * x);
            let pre = SQRT_2PI / (2.0 * x);
            lattice_sum(
                1,
                |j| {
                    let o = (2 * j - 1) as f64;
                    c * o * o
                },
                |_| 1.0,
                Tail::Geometric,
                ctrl.abs_tol / pre,
                ctrl.max_terms,
            )
            .scaled(pre)
        }
    };
    clamp_probability(v)
}

fn clamp_probability(v: SeriesValue) -> SeriesValue {
    SeriesValue {
        value: v.value.clamp(0.0, 1.0),
        ..v
    }
}

#[inline]
fn alternating_sign(j: i64) -> f64 {
    if j.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sub-probability density at `z` of a standard Brownian motion started at 0
/// and killed on leaving `(-h, h)`, at time `t`.
pub fn delta(z: f64, h: f64, t: f64, ctrl: &SeriesControl) -> Result<SeriesValue> {
    delta_with(z, h, t, KernelMethod::Auto, ctrl)
}

pub fn delta_with(z: f64, h: f64, t: f64, method: KernelMethod, ctrl: &SeriesControl) -> Result<SeriesValue> {
    require_positive("h", h)?;
    require_positive("t", t)?;
    if !(z.abs() < h) {
        return Err(domain("z", z, "requires |z| < h"));
    }
    Ok(delta_unchecked(z, h, t, method, ctrl))
}

pub(crate) fn delta_unchecked(z: f64, h: f64, t: f64, method: KernelMethod, ctrl: &SeriesControl) -> SeriesValue {
    let width = 2.0 * h;
    if use_images(method, t, width) {
        let pre = 1.0 / (SQRT_2PI * t.sqrt());
        let two_t = 2.0 * t;
        lattice_sum(
            0,
            |j| {
                let u = z + 2.0 * h * j as f64;
                u * u / two_t
            },
            alternating_sign,
            Tail::Alternating,
            ctrl.abs_tol / pre,
            ctrl.max_terms,
        )
        .scaled(pre)
    } else {
        eigen_sum(0.0, z, -h, h, t, ctrl)
    }
}

fn use_images(method: KernelMethod, t: f64, width: f64) -> bool {
    match method {
        KernelMethod::Images => true,
        KernelMethod::Eigen => false,
        KernelMethod::Auto => t <= 0.5 * width * width,
    }
}

/// Killed density on `(a, b)` via the sine expansion
/// `(2/L) sum_n sin(n pi (x-a)/L) sin(n pi (z-a)/L) exp(-n^2 pi^2 t / (2 L^2))`.
fn eigen_sum(x: f64, z: f64, a: f64, b: f64, t: f64, ctrl: &SeriesControl) -> SeriesValue {
    let len = b - a;
    let pre = 2.0 / len;
    let c = PI * PI * t / (2.0 * len * len);
    let wx = PI * (x - a) / len;
    let wz = PI * (z - a) / len;
    let tol = ctrl.abs_tol / pre;
    let mut terms = Vec::with_capacity(16);
    let mut tail_bound = f64::INFINITY;
    let mut converged = false;
    let mut n = 1u64;
    while terms.len() < ctrl.max_terms {
        let nf = n as f64;
        terms.push((nf * wx).sin() * (nf * wz).sin() * (-c * nf * nf).exp());
        let next = (-c * (nf + 1.0) * (nf + 1.0)).exp();
        let ratio = (-c * (2.0 * nf + 3.0)).exp();
        tail_bound = if next == 0.0 { 0.0 } else { next / (1.0 - ratio) };
        n += 1;
        if tail_bound <= tol {
            converged = true;
            break;
        }
    }
    SeriesValue {
        value: sum_by_magnitude(&mut terms),
        tail_bound,
        terms: terms.len(),
        converged,
    }
    .scaled(pre)
}

/// Transition density (w.r.t. Lebesgue measure) of Brownian motion killed on
/// leaving `(-h, h)`.
pub fn killed_bm_density(t: f64, x: f64, y: f64, h: f64, ctrl: &SeriesControl) -> Result<SeriesValue> {
    killed_band_density(t, x, y, -h, h, KernelMethod::Auto, ctrl)
}

/// Transition density of Brownian motion killed on leaving the band `(a, b)`.
pub fn killed_band_density(
    t: f64,
    x: f64,
    z: f64,
    a: f64,
    b: f64,
    method: KernelMethod,
    ctrl: &SeriesControl,
) -> Result<SeriesValue> {
    require_positive("t", t)?;
    require_finite("a", a)?;
    require_finite("b", b)?;
    if a >= b {
        return Err(domain("b", b, "requires a < b"));
    }
    if !(a < x && x < b) {
        return Err(domain("x", x, "must lie inside the band"));
    }
    if !(a < z && z < b) {
        return Err(domain("y", z, "must lie inside the band"));
    }
    Ok(killed_band_unchecked(t, x, z, a, b, method, ctrl))
}

pub(crate) fn killed_band_unchecked(
    t: f64,
    x: f64,
    z: f64,
    a: f64,
    b: f64,
    method: KernelMethod,
    ctrl: &SeriesControl,
) -> SeriesValue {
    let len = b - a;
    if !use_images(method, t, len) {
        return eigen_sum(x, z, a, b, t, ctrl);
    }
    let pre = 1.0 / (SQRT_2PI * t.sqrt());
    let two_t = 2.0 * t;
    let tol = 0.5 * ctrl.abs_tol / pre;
    let half_terms = (ctrl.max_terms / 2).max(1);
    let direct = x - z;
    let mirrored = x + z - 2.0 * a;
    let gaussians = |offset: f64| {
        lattice_sum(
            (-offset / (2.0 * len)).round() as i64,
            move |k| {
                let u = offset + 2.0 * len * k as f64;
                u * u / two_t
            },
            |_| 1.0,
            Tail::Geometric,
            tol,
            half_terms,
        )
    };
    let plus = gaussians(direct);
    let minus = gaussians(mirrored);
    SeriesValue {
        value: (plus.value - minus.value).max(0.0),
        tail_bound: plus.tail_bound + minus.tail_bound,
        terms: plus.terms + minus.terms,
        converged: plus.converged && minus.converged,
    }
    .scaled(pre)
}

/// `P(bridge from 0 to x of length t stays inside (-h, h))`.
///
/// Returns 0 when `|x| >= h`: a bridge pinned outside the band must exit.
pub fn bridge_survival(x: f64, t: f64, h: f64, ctrl: &SeriesControl) -> Result<SeriesValue> {
    require_positive("t", t)?;
    require_positive("h", h)?;
    require_finite("x", x)?;
    if x.abs() >= h {
        return Ok(SeriesValue::exact(0.0));
    }
    Ok(bridge_survival_unchecked(x, t, h, ctrl))
}

pub(crate) fn bridge_survival_unchecked(x: f64, t: f64, h: f64, ctrl: &SeriesControl) -> SeriesValue {
    let v = lattice_sum(
        0,
        |m| {
            let mh = m as f64 * h;
            2.0 * mh * (mh - x) / t
        },
        alternating_sign,
        Tail::Alternating,
        ctrl.abs_tol,
        ctrl.max_terms,
    );
    clamp_probability(v)
}

/// Transition density of the 3-dimensional Bessel process,
/// `(y/x) (p_t(x, y) - p_t(x, -y))`.
pub fn bessel3_density(t: f64, x: f64, y: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    require_positive("y", y)?;
    Ok(bessel3_unchecked(t, x, y))
}

pub(crate) fn bessel3_unchecked(t: f64, x: f64, y: f64) -> f64 {
    (y / x) * gauss_unchecked(t, x, y) * -(-2.0 * x * y / t).exp_m1()
}

/// Green kernel of Brownian motion killed on leaving `(-h, h)`.
pub fn resolvent_g0(x: f64, y: f64, h: f64) -> Result<f64> {
    require_positive("h", h)?;
    for (name, v) in [("x", x), ("y", y)] {
        if !(-h..=h).contains(&v) {
            return Err(domain(name, v, "must lie in [-h, h]"));
        }
    }
    Ok(if x <= y {
        (x + h) * (h - y) / h
    } else {
        (y + h) * (h - x) / h
    })
}

/// Density of the last visit to 0 before Brownian motion leaves `(-h, h)`:
/// `F(h / sqrt t) / (h sqrt(2 pi t))`.
pub fn last_passage_density(t: f64, h: f64, ctrl: &SeriesControl) -> Result<SeriesValue> {
    require_positive("t", t)?;
    require_positive("h", h)?;
    Ok(last_passage_unchecked(t, h, ctrl))
}

pub(crate) fn last_passage_unchecked(t: f64, h: f64, ctrl: &SeriesControl) -> SeriesValue {
    let pre = 1.0 / (h * SQRT_2PI * t.sqrt());
    let inner = SeriesControl {
        abs_tol: ctrl.abs_tol / pre,
        ..*ctrl
    };
    kolmogorov_unchecked(h / t.sqrt(), KolmogorovMethod::Auto, &inner).scaled(pre)
}

/// `P(lambda_0 <= s)`: the last-passage density integrated over `(0, s)`.
pub fn last_passage_cdf(s: f64, h: f64, cfg: &QuadConfig) -> Result<f64> {
    require_positive("s", s)?;
    require_positive("h", h)?;
    cfg.validate()?;
    let ctrl = SeriesControl::default();
    let sub = cfg.with_substitution(EndpointSubstitution::SqrtLeft);
    let r = integrate_unchecked(|t| last_passage_unchecked(t, h, &ctrl).value, 0.0, s, &sub);
    Ok(r.value.clamp(0.0, 1.0))
}

/// Inverse of [`last_passage_cdf`] by bisection, to `1e-12` relative in `s`.
pub fn last_passage_quantile(p: f64, h: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("p", p, "must lie in (0, 1)"));
    }
    let mut hi = h * h;
    while last_passage_cdf(hi, h, cfg)? < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if last_passage_cdf(mid, h, cfg)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both sides of `tanh(pi x / 2) = (4x/pi) sum_{k>=1} 1 / ((2k-1)^2 + x^2)`.
///
/// The right side sums `max_terms` terms and closes the remainder with the
/// midpoint-rule integral of the summand plus its first Euler–Maclaurin
/// correction.
pub fn tanh_series_check(x: f64, ctrl: &SeriesControl) -> (f64, f64) {
    let lhs = (PI * x / 2.0).tanh();
    if x == 0.0 {
        return (lhs, 0.0);
    }
    let x2 = x * x;
    let k_max = ctrl.max_terms.max(1);
    let mut terms: Vec<f64> = (1..=k_max)
        .map(|k| {
            let o = (2 * k - 1) as f64;
            1.0 / (o * o + x2)
        })
        .collect();
    let ax = x.abs();
    let u = 2.0 * k_max as f64;
    terms.push((ax / u).atan() / (2.0 * ax));
    terms.push(-u / (6.0 * (u * u + x2).powi(2)));
    let rhs = 4.0 * x / PI * sum_by_magnitude(&mut terms);
    (lhs, rhs)
}
