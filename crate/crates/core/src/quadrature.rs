//! Adaptive Gauss–Kronrod (G10/K21) integration that never samples interval endpoints,
//! with square-root substitutions for `1/sqrt` endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_positive, Error, Result};

/// Change of variables applied before integrating on `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointSubstitution {
    #[default]
    None,
    /// `t = a + u^2`: removes a `(t - a)^(-1/2)` singularity.
    SqrtLeft,
    /// `t = b - u^2`: removes a `(b - t)^(-1/2)` singularity.
    SqrtRight,
    /// Both of the above, joined at the midpoint of `(a, b)`.
    SqrtBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of subintervals held by the adaptive scheme.
    pub max_subdivisions: usize,
    pub endpoint_substitution: EndpointSubstitution,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            endpoint_substitution: EndpointSubstitution::None,
        }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize, sub: EndpointSubstitution) -> Result<Self> {
        let cfg = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            endpoint_substitution: sub,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("abs_tol", self.abs_tol)?;
        require_positive("rel_tol", self.rel_tol)?;
        if self.max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_substitution(self, endpoint_substitution: EndpointSubstitution) -> Self {
        Self {
            endpoint_substitution,
            ..self
        }
    }

    pub fn with_tolerances(self, abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..self
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl IntegralResult {
    /// Combines two independent pieces of one integral.
    pub fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            converged: self.converged && other.converged,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            ..self
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
/// Weights of the embedded 10-point Gauss rule (odd entries of `XGK`).
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];
const RULE_POINTS: usize = 21;

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// 21-point Kronrod rule with embedded 10-point Gauss error estimate.
fn kronrod21(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let res_abs = res_abs * scale;
    let res_asc = res_asc * scale;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment {
        lo,
        hi,
        value: res_k * half,
        error,
    }
}

/// Adaptive bisection over the given initial partition.
fn adaptive(mut f: impl FnMut(f64) -> f64, breaks: &[f64], cfg: &QuadConfig) -> IntegralResult {
    let mut heap = BinaryHeap::with_capacity(cfg.max_subdivisions + 2);
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        heap.push(kronrod21(&mut f, w[0], w[1]));
        evaluations += RULE_POINTS;
    }
    let mut value: f64 = heap.iter().map(|s| s.value).sum();
    let mut error: f64 = heap.iter().map(|s| s.error).sum();
    // Segments too narrow to split keep their error but leave the queue.
    let mut frozen = Vec::new();
    while error > cfg.target(value) && heap.len() + frozen.len() < cfg.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) || (worst.hi - worst.lo) <= 4.0 * f64::EPSILON * mid.abs() {
            frozen.push(worst);
            continue;
        }
        let left = kronrod21(&mut f, worst.lo, mid);
        let right = kronrod21(&mut f, mid, worst.hi);
        evaluations += 2 * RULE_POINTS;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum in a fixed order to shed the drift of the running totals.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.extend(frozen);
    segs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let value: f64 = segs.iter().map(|s| s.value).sum();
    let error: f64 = segs.iter().map(|s| s.error).sum();
    IntegralResult {
        value,
        error_estimate: error,
        converged: error.is_finite() && error <= cfg.target(value),
        evaluations,
    }
}

fn check_limits(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(domain("limits", b - a, "finite limits required; use integrate_semi_infinite"));
    }
    if a >= b {
        return Err(domain("b", b, "requires a < b"));
    }
    Ok(())
}

/// Integrates `f` over `(a, b)` applying `cfg.endpoint_substitution`.
pub fn integrate_1d(f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    check_limits(a, b)?;
    Ok(integrate_unchecked(f, a, b, cfg))
}

/// Like [`integrate_1d`] with extra interior breakpoints (kinks, jumps).
/// Breakpoints outside `(a, b)` are ignored.
pub fn integrate_with_breaks(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<IntegralResult> {
    cfg.validate()?;
    check_limits(a, b)?;
    if cfg.endpoint_substitution != EndpointSubstitution::None {
        return Err(Error::Config("breakpoints are only supported without substitution".into()));
    }
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| a < p && p < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    Ok(adaptive(f, &pts, cfg))
}

pub(crate) fn integrate_unchecked(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadConfig) -> IntegralResult {
    match cfg.endpoint_substitution {
        EndpointSubstitution::None => adaptive(f, &[a, b], cfg),
        EndpointSubstitution::SqrtLeft => {
            let s = (b - a).sqrt();
            adaptive(|u| 2.0 * u * f(a + u * u), &[0.0, s], cfg)
        }
        EndpointSubstitution::SqrtRight => {
            let s = (b - a).sqrt();
            adaptive(|u| 2.0 * u * f(b - u * u), &[0.0, s], cfg)
        }
        EndpointSubstitution::SqrtBoth => {
            let s = (0.5 * (b - a)).sqrt();
            adaptive(
                |v| {
                    if v <= s {
                        2.0 * v * f(a + v * v)
                    } else {
                        let u = 2.0 * s - v;
                        2.0 * u * f(b - u * u)
                    }
                },
                &[0.0, s, 2.0 * s],
                cfg,
            )
        }
    }
}

/// Integrates over `(0, inf)` through `t = u / (1 - u)`, then over `u` in
/// `(0, 1)` with `cfg.endpoint_substitution`.
pub fn integrate_semi_infinite(mut f: impl FnMut(f64) -> f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    cfg.validate()?;
    Ok(integrate_unchecked(
        |u| {
            let w = 1.0 - u;
            if w <= 0.0 {
                return 0.0;
            }
            f(u / w) / (w * w)
        },
        0.0,
        1.0,
        cfg,
    ))
}

/// `int_0^inf exp(-gamma t) f(t) dt`.
pub fn laplace_numeric(mut f: impl FnMut(f64) -> f64, gamma: f64, cfg: &QuadConfig) -> Result<IntegralResult> {
    require_positive("gamma", gamma)?;
    integrate_semi_infinite(
        |t| {
            let w = (-gamma * t).exp();
            if w == 0.0 {
                0.0
            } else {
                w * f(t)
            }
        },
        cfg,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on the three-term
/// recurrence). `n` must be at least 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{delta, last_passage_density, SeriesControl};

    #[test]
    fn inverse_sqrt_with_substitution() {
        let cfg = QuadConfig::default().with_substitution(EndpointSubstitution::SqrtLeft);
        let r = integrate_1d(|t| 1.0 / t.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((r.value - 2.0).abs() <= 1e-10);
        assert!(r.converged);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn inverse_sqrt_without_substitution_is_expensive() {
        let r = integrate_1d(|t| 1.0 / t.sqrt(), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!(r.evaluations > 2000, "evaluations = {}", r.evaluations);
    }

    #[test]
    fn right_and_both_substitutions() {
        let right = QuadConfig::default().with_substitution(EndpointSubstitution::SqrtRight);
        let r = integrate_1d(|t| 1.0 / (1.0 - t).sqrt(), 0.0, 1.0, &right).unwrap();
        assert!((r.value - 2.0).abs() <= 1e-10);
        let both = QuadConfig::default().with_substitution(EndpointSubstitution::SqrtBoth);
        let r = integrate_1d(|t| 1.0 / (t * (1.0 - t)).sqrt(), 0.0, 1.0, &both).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() <= 1e-10, "{}", r.value);
    }

    #[test]
    fn polynomial() {
        let r = integrate_1d(|t| t, 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!((r.value - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn semi_infinite_exponentials() {
        let cfg = QuadConfig::default();
        let r = integrate_semi_infinite(|t| (-t).exp(), &cfg).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-10);
        let r = integrate_semi_infinite(|t| t * (-t).exp(), &cfg).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn last_passage_density_normalised() {
        let ctrl = SeriesControl::default();
        let cfg = QuadConfig::default().with_substitution(EndpointSubstitution::SqrtLeft);
        let r = integrate_semi_infinite(|t| last_passage_density(t, 1.0, &ctrl).unwrap().value, &cfg).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-8, "{}", r.value);
    }

    #[test]
    fn delta_integrates_to_one() {
        let ctrl = SeriesControl::default();
        let inner = QuadConfig::default().with_tolerances(1e-13, 1e-12);
        let outer = QuadConfig::default().with_substitution(EndpointSubstitution::SqrtLeft);
        let r = integrate_semi_infinite(
            |s| {
                let left = integrate_unchecked(|u| delta(u, 1.0, s, &ctrl).unwrap().value, -1.0, 0.0, &inner);
                let right = integrate_unchecked(|u| delta(u, 1.0, s, &ctrl).unwrap().value, 0.0, 1.0, &inner);
                left.value + right.value
            },
            &outer,
        )
        .unwrap();
        assert!((r.value - 1.0).abs() <= 1e-8, "{}", r.value);
    }

    #[test]
    fn laplace_of_constant_and_heat_kernel() {
        let cfg = QuadConfig::default();
        let r = laplace_numeric(|_| 1.0, 2.0, &cfg).unwrap();
        assert!((r.value - 0.5).abs() <= 1e-10);
        let sqrt_cfg = cfg.with_substitution(EndpointSubstitution::SqrtLeft);
        let r = laplace_numeric(
            |t| crate::special_functions::gauss_density(t, 0.0, 1.0).unwrap(),
            1.0,
            &sqrt_cfg,
        )
        .unwrap();
        let exact = (-(2f64).sqrt()).exp() / 2f64.sqrt();
        assert!((r.value - exact).abs() <= 1e-10);
        assert!(laplace_numeric(|_| 1.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let r = integrate_with_breaks(|x: f64| x.abs(), -1.0, 2.0, &[0.0, 5.0], &QuadConfig::default()).unwrap();
        assert!((r.value - 2.5).abs() <= 1e-13);
        assert_eq!(r.evaluations, 2 * RULE_POINTS);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = QuadConfig::default();
        assert!(integrate_1d(|t| t, 1.0, 0.0, &cfg).is_err());
        assert!(integrate_1d(|t| t, 0.0, f64::INFINITY, &cfg).is_err());
        assert!(QuadConfig::new(0.0, 1e-10, 10, EndpointSubstitution::None).is_err());
        assert!(QuadConfig::new(1e-10, 1e-10, 0, EndpointSubstitution::None).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadConfig {
            max_subdivisions: 3,
            ..QuadConfig::default()
        };
        let r = integrate_1d(|t: f64| (50.0 * t).sin() / t.sqrt(), 0.0, 10.0, &cfg).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn kronrod_weights_exact_degrees() {
        let sk: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        let sg: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((sk - 2.0).abs() < 1e-15 && (sg - 2.0).abs() < 1e-15);
        let mut f = |x: f64| x.powi(30) + x.powi(18);
        let seg = kronrod21(&mut f, -1.0, 1.0);
        assert!((seg.value - (2.0 / 31.0 + 2.0 / 19.0)).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(4);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 7 is exact for 4 nodes
        let m6: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((m6 - 2.0 / 7.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }
}
