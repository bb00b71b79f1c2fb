//! Parity function of the embedded random walk, its integral error terms and
//! binomial-tree versus Gaussian expectations.

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, require_positive, Error, Result};
use crate::exit_mean::{
    bridge_exit_mean_band, bridge_exit_position_mean, exit_position_bound, exit_time_bound, BridgeSpec,
};
use crate::interval::Interval;
use crate::monte_carlo::{derive_seed, map_paths, mc_exit_position, Estimate, McConfig};
use crate::quadrature::{gauss_legendre, integrate_with_breaks, QuadConfig};
use crate::special_functions::gauss_unchecked;

/// Lattice `h Z` split into even points `2kh` and odd points `(2k+1)h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub h: f64,
}

impl GridGeometry {
    pub fn new(h: f64) -> Result<Self> {
        require_positive("h", h)?;
        Ok(Self { h })
    }

    /// Index `k` of the cell `[kh, (k+1)h)` holding `x`.
    pub fn cell(&self, x: f64) -> i64 {
        (x / self.h).floor() as i64
    }

    pub fn on_grid(&self, x: f64) -> bool {
        (x / self.h).fract() == 0.0
    }

    pub fn dist_even(&self, x: f64) -> f64 {
        let m = (x / self.h).rem_euclid(2.0);
        m.min(2.0 - m) * self.h
    }

    pub fn dist_odd(&self, x: f64) -> f64 {
        let m = (x / self.h - 1.0).rem_euclid(2.0);
        m.min(2.0 - m) * self.h
    }

    /// `(lower odd point, upper odd point, even midpoint)` around `x`.
    pub fn odd_band(&self, x: f64) -> (f64, f64, f64) {
        let k = (x / (2.0 * self.h)).round();
        let even = 2.0 * k * self.h;
        (even - self.h, even + self.h, even)
    }

    /// Exit band of the reversed bridge `B^(0,T,-x)`: `(kh - x, (k+1)h - x)`
    /// for `x` in the cell `k`. Grid points take the cell on their left.
    pub fn exit_band(&self, x: f64) -> Interval {
        let k = if self.on_grid(x) { self.cell(x) - 1 } else { self.cell(x) };
        let lo = k as f64 * self.h - x;
        Interval { lo, hi: lo + self.h }
    }

    /// `+1` when `x` lies between an odd point and the even midpoint above
    /// it, `-1` on the other half.
    fn correction_sign(&self, x: f64) -> f64 {
        let k = if self.on_grid(x) { self.cell(x) - 1 } else { self.cell(x) };
        if k.rem_euclid(2) == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// How the inner mean `E[B at exit]` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExitPositionRoute {
    /// Monte Carlo with the drift-integral estimator; node `i` uses seed `derive_seed(seed, i)`.
    MonteCarlo(McConfig),
    /// Iterated quadrature over the killed band density.
    Quadrature(QuadConfig),
}

/// `q(x)` from the exit-position identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    pub x: f64,
    /// `dist(x, odd points) / h`.
    pub dist_term: f64,
    /// `+- E[B at exit] / h`.
    pub correction: f64,
    /// Standard error of `correction`; zero on the quadrature route.
    pub se: f64,
    /// `dist_term + correction`, clamped to `[0, 1]`.
    pub q: f64,
    pub clamped: bool,
    /// `x` is a multiple of `h`; the value is the limit from the left.
    pub on_grid: bool,
}

fn check_walsh(x: f64, horizon: f64, h: f64) -> Result<GridGeometry> {
    require_finite("x", x)?;
    require_positive("T", horizon)?;
    GridGeometry::new(h)
}

/// `E[B^(0,T,-x)]` at its exit from the band of `x`, at node `index`.
pub fn inner_exit_position(x: f64, horizon: f64, h: f64, route: &ExitPositionRoute, index: u64) -> Result<Estimate> {
    let g = check_walsh(x, horizon, h)?;
    if g.on_grid(x) {
        return Ok(Estimate { mean: 0.0, se: 0.0 });
    }
    let spec = BridgeSpec::new(0.0, -x, horizon)?;
    let band = g.exit_band(x);
    match route {
        ExitPositionRoute::MonteCarlo(cfg) => {
            let cfg = cfg.with_seed(derive_seed(cfg.seed, index));
            Ok(mc_exit_position(&spec, &band, &cfg)?.drift_integral)
        }
        ExitPositionRoute::Quadrature(cfg) => {
            let r = bridge_exit_position_mean(&spec, &band, cfg)?;
            Ok(Estimate { mean: r.value, se: 0.0 })
        }
    }
}

/// `q(x) = P(k_star even | W_T = x)` via `dist(x, odd)/h +- E[B at exit]/h`.
pub fn q_formula(x: f64, horizon: f64, h: f64, route: &ExitPositionRoute) -> Result<QValue> {
    q_formula_at(x, horizon, h, route, 0)
}

/// As [`q_formula`], with the Monte Carlo seed derived from `index`.
pub fn q_formula_at(x: f64, horizon: f64, h: f64, route: &ExitPositionRoute, index: u64) -> Result<QValue> {
    let g = check_walsh(x, horizon, h)?;
    let e = inner_exit_position(x, horizon, h, route, index)?;
    let dist_term = g.dist_odd(x) / h;
    let correction = g.correction_sign(x) * e.mean / h;
    let raw = dist_term + correction;
    let q = raw.clamp(0.0, 1.0);
    Ok(QValue {
        x,
        dist_term,
        correction,
        se: e.se / h,
        q,
        clamped: q != raw,
        on_grid: g.on_grid(x),
    })
}

/// Error terms of the tree expansion at one `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalshIntegrals {
    pub h: f64,
    /// `int |E[B^(0,T,-x) at exit]| p_T(0,x) dx`.
    pub corollary: Estimate,
    /// `corollary / h^2`.
    pub corollary_ratio: f64,
    /// `int (2h^2 - dist_even^2)(q - dist_odd/h) p_T(0,x) dx`.
    pub parity_residual: Estimate,
    /// `parity_residual / h^3`.
    pub parity_residual_ratio: f64,
    /// Bound on the part of the corollary integral beyond the truncation.
    pub tail_bound: f64,
    pub nodes: usize,
}

/// Both integrals on `|x| <= 6 sqrt(T)` with 4 Gauss–Legendre nodes per
/// lattice cell, using the evenness of both integrands.
pub fn walsh_integrals(horizon: f64, h: f64, route: &ExitPositionRoute) -> Result<WalshIntegrals> {
    let g = check_walsh(0.0, horizon, h)?;
    let reach = 6.0 * horizon.sqrt();
    let cells = (reach / h - 1e-9).ceil() as usize;
    let (gx, gw) = gauss_legendre(4);
    let mut nodes = Vec::with_capacity(4 * cells);
    for c in 0..cells {
        let a = c as f64 * h;
        let b = ((c + 1) as f64 * h).min(reach);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (u, w) in gx.iter().zip(&gw) {
            nodes.push((mid + half * u, half * w));
        }
    }
    let inner = map_paths(nodes.len(), |i| inner_exit_position(nodes[i].0, horizon, h, route, i as u64));
    let (mut cor, mut cor_var, mut residual, mut residual_var) = (0.0, 0.0, 0.0, 0.0);
    for ((x, w), e) in nodes.iter().zip(inner) {
        let e = e?;
        let weight = 2.0 * w * gauss_unchecked(horizon, 0.0, *x);
        cor += weight * e.mean.abs();
        cor_var += (weight * e.se).powi(2);
        let d = g.dist_even(*x);
        let f = (2.0 * h * h - d * d) * g.correction_sign(*x) / h;
        residual += weight * f * e.mean;
        residual_var += (weight * f * e.se).powi(2);
    }
    // |E| <= (2h + |x| + 3 sqrt(2T)) since the mean exit time is at most T
    let tail_bound = 2.0 * tail_moment(horizon, reach, 2.0 * h + 3.0 * (2.0 * horizon).sqrt());
    let corollary = Estimate {
        mean: cor,
        se: cor_var.sqrt(),
    };
    let parity_residual = Estimate {
        mean: residual,
        se: residual_var.sqrt(),
    };
    Ok(WalshIntegrals {
        h,
        corollary,
        corollary_ratio: cor / (h * h),
        parity_residual,
        parity_residual_ratio: residual / (h * h * h),
        tail_bound,
        nodes: nodes.len(),
    })
}

/// `int_L^inf (c + x) p_T(0,x) dx`.
fn tail_moment(horizon: f64, reach: f64, c: f64) -> f64 {
    let s = horizon.sqrt();
    let z = reach / s;
    // P(N > z) <= exp(-z^2/2) / 2
    let tail = 0.5 * (-0.5 * z * z).exp();
    c * tail + s * gauss_unchecked(1.0, 0.0, z)
}

/// Payoff `g` of the terminal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    Linear,
    Quadratic,
    /// `max(x - strike, 0)`.
    Call { strike: f64 },
    /// `|x - knot|`.
    Kinked { knot: f64 },
}

impl PayoffSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PayoffSpec::Linear => x,
            PayoffSpec::Quadratic => x * x,
            PayoffSpec::Call { strike } => (x - strike).max(0.0),
            PayoffSpec::Kinked { knot } => (x - knot).abs(),
        }
    }

    fn kink(&self) -> Option<f64> {
        match *self {
            PayoffSpec::Call { strike } => Some(strike),
            PayoffSpec::Kinked { knot } => Some(knot),
            _ => None,
        }
    }
}

/// Symmetric-walk expectation against the Gaussian one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeComparison {
    pub n: usize,
    pub h: f64,
    pub tree_value: f64,
    pub gaussian_value: f64,
    /// `tree_value - gaussian_value`.
    pub error: f64,
}

/// `E g(W_n)` for the walk with steps `+-sqrt(T/n)` versus `E g(W_T)`.
pub fn tree_vs_gaussian(payoff: &PayoffSpec, horizon: f64, n: usize) -> Result<TreeComparison> {
    require_positive("T", horizon)?;
    if n < 1 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if let Some(k) = payoff.kink() {
        require_finite("strike", k)?;
    }
    let h = (horizon / n as f64).sqrt();
    let tree = tree_value(payoff, n, h);
    let gaussian = gaussian_value(payoff, horizon)?;
    Ok(TreeComparison {
        n,
        h,
        tree_value: tree,
        gaussian_value: gaussian,
        error: tree - gaussian,
    })
}

/// Binomial weights in log space, anchored at the central atom and
/// normalised by their sum; atoms paired as `x` and `-x`.
fn tree_value(payoff: &PayoffSpec, n: usize, h: f64) -> f64 {
    let nf = n as f64;
    let half = n / 2;
    // log C(n, j) - log C(n, half) for j = half, half - 1, ..., 0
    let mut log_w = vec![0.0; half + 1];
    for j in (0..half).rev() {
        log_w[j] = log_w[j + 1] + ((j as f64 + 1.0) / (nf - j as f64)).ln();
    }
    let mut mass = Vec::with_capacity(half + 1);
    let mut terms = Vec::with_capacity(half + 1);
    for (j, lw) in log_w.iter().enumerate() {
        let w = lw.exp();
        let x = (n - 2 * j) as f64 * h;
        if 2 * j == n {
            mass.push(w);
            terms.push(w * payoff.eval(0.0));
        } else {
            mass.push(2.0 * w);
            terms.push(w * (payoff.eval(x) + payoff.eval(-x)));
        }
    }
    // smallest first
    let total: f64 = mass.iter().sum();
    terms.iter().sum::<f64>() / total
}

/// `int_0^inf (g(s) + g(-s)) p_T(0,s) ds`, truncated where the density underflows.
fn gaussian_value(payoff: &PayoffSpec, horizon: f64) -> Result<f64> {
    let reach = 40.0 * horizon.sqrt();
    let breaks: Vec<f64> = payoff.kink().map(f64::abs).into_iter().collect();
    let cfg = QuadConfig::default().with_tolerances(1e-15, 1e-14);
    let r = integrate_with_breaks(
        |s| (payoff.eval(s) + payoff.eval(-s)) * gauss_unchecked(horizon, 0.0, s),
        0.0,
        reach,
        &breaks,
        &cfg,
    )?;
    Ok(r.value)
}

/// Exit time and position bounds at one band next to the computed means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub mean_exit_time: f64,
    pub time_bound: f64,
    pub exit_position: f64,
    pub position_bound: f64,
    /// Both means respect their bounds.
    pub ok: bool,
}

impl LemmaReport {
    pub fn time_slack(&self) -> f64 {
        self.time_bound - self.mean_exit_time
    }

    pub fn position_slack(&self) -> f64 {
        self.position_bound - self.exit_position.abs()
    }
}

/// Compares given means of a bridge from 0 with both bounds.
pub fn check_lemma_bounds(spec: &BridgeSpec, band: &Interval, mean_exit_time: f64, exit_position: f64) -> Result<LemmaReport> {
    if spec.start != 0.0 {
        return Err(domain("x", spec.start, "bridge must start at 0"));
    }
    let time_bound = exit_time_bound(band.lo, band.hi, spec.end, spec.horizon)?;
    let position_bound = exit_position_bound(band.lo, band.hi, spec.end, spec.horizon, mean_exit_time)?;
    Ok(LemmaReport {
        mean_exit_time,
        time_bound,
        exit_position,
        position_bound,
        ok: mean_exit_time <= time_bound && exit_position.abs() <= position_bound,
    })
}

/// Quadrature means for the band, checked against both bounds.
pub fn lemma_bounds_check(spec: &BridgeSpec, band: &Interval, cfg: &QuadConfig) -> Result<LemmaReport> {
    let mean = bridge_exit_mean_band(spec, band, cfg)?.value;
    let position = bridge_exit_position_mean(spec, band, cfg)?.value;
    check_lemma_bounds(spec, band, mean, position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometry_points() {
        let g = GridGeometry::new(0.25).unwrap();
        assert!((g.dist_odd(0.33) - 0.08).abs() < 1e-15);
        assert!((g.dist_even(0.33) - 0.17).abs() < 1e-15);
        assert_eq!(g.odd_band(0.33), (0.25, 0.75, 0.5));
        let b = g.exit_band(0.33);
        assert!((b.lo + 0.08).abs() < 1e-15 && (b.hi - 0.17).abs() < 1e-15);
        assert_eq!(g.correction_sign(0.33), 1.0);
        assert_eq!(g.correction_sign(0.1), -1.0);
        assert!(g.on_grid(0.5) && !g.on_grid(0.33));
    }

    proptest! {
        #[test]
        fn dists_sum_to_h(x in -10.0f64..10.0, h in 0.01f64..2.0) {
            let g = GridGeometry::new(h).unwrap();
            let (o, e) = (g.dist_odd(x), g.dist_even(x));
            prop_assert!((o + e - h).abs() < 1e-12 * (1.0 + x.abs() / h));
            prop_assert!((0.0..=h * (1.0 + 1e-12)).contains(&o));
        }

        #[test]
        fn dists_are_lipschitz(x in -5.0f64..5.0, d in -0.01f64..0.01, h in 0.05f64..1.0) {
            let g = GridGeometry::new(h).unwrap();
            prop_assert!((g.dist_odd(x + d) - g.dist_odd(x)).abs() <= d.abs() + 1e-12);
            prop_assert!((g.dist_even(x + d) - g.dist_even(x)).abs() <= d.abs() + 1e-12);
        }

        #[test]
        fn exit_band_holds_zero(x in -5.0f64..5.0, h in 0.05f64..1.0) {
            let b = GridGeometry::new(h).unwrap().exit_band(x);
            prop_assert!(b.lo <= 0.0 && b.hi >= 0.0);
            prop_assert!((b.hi - b.lo - h).abs() < 1e-12);
        }

        #[test]
        fn odd_moments_vanish_on_the_tree(n in 1usize..400) {
            prop_assert_eq!(tree_value(&PayoffSpec::Linear, n, (1.0 / n as f64).sqrt()), 0.0);
        }
    }

    #[test]
    fn polynomial_payoffs_match() {
        for n in [1, 2, 3, 10, 100, 1600] {
            let lin = tree_vs_gaussian(&PayoffSpec::Linear, 1.0, n).unwrap();
            assert_eq!(lin.error, 0.0);
            let quad = tree_vs_gaussian(&PayoffSpec::Quadratic, 1.0, n).unwrap();
            assert!(quad.error.abs() < 1e-13, "{n}: {}", quad.error);
        }
    }

    #[test]
    fn call_error_shrinks() {
        let p = PayoffSpec::Call { strike: 0.0 };
        let e: Vec<f64> = [100, 400, 1600]
            .iter()
            .map(|&n| tree_vs_gaussian(&p, 1.0, n).unwrap().error.abs())
            .collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
        // E max(W_1, 0) = 1/sqrt(2 pi)
        let g = tree_vs_gaussian(&p, 1.0, 4).unwrap().gaussian_value;
        assert!((g - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn kinked_payoff_gaussian_value() {
        // E|W_1 - 1| = 2 phi(1) + 2 Phi(1) - 1 with phi, Phi the standard normal pdf and cdf
        let p = PayoffSpec::Kinked { knot: 1.0 };
        let v = tree_vs_gaussian(&p, 1.0, 2).unwrap().gaussian_value;
        let phi = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.841_344_746_068_542_9;
        assert!((v - (2.0 * phi + 2.0 * cdf - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn q_formula_quadrature_route_is_a_probability() {
        let route = ExitPositionRoute::Quadrature(QuadConfig::default().with_tolerances(1e-9, 1e-8));
        for x in [0.05, 0.2, 0.33, 0.45, -0.33] {
            let q = q_formula(x, 1.0, 0.25, &route).unwrap();
            assert!(!q.clamped && (0.0..=1.0).contains(&q.q), "{q:?}");
        }
        let a = q_formula(0.33, 1.0, 0.25, &route).unwrap().q;
        let b = q_formula(-0.33, 1.0, 0.25, &route).unwrap().q;
        assert!((a - b).abs() < 1e-7, "{a} {b}");
    }

    #[test]
    fn grid_points_use_left_limit() {
        let route = ExitPositionRoute::Quadrature(QuadConfig::default());
        let q = q_formula(0.5, 1.0, 0.25, &route).unwrap();
        assert!(q.on_grid);
        assert_eq!(q.q, 1.0);
        assert_eq!(q.correction, 0.0);
    }

    #[test]
    fn lemma_examples() {
        let cfg = QuadConfig::default().with_tolerances(1e-10, 1e-9);
        let band = Interval::new(-0.1, 0.1).unwrap();
        for y in [1.0, -1.0] {
            let r = lemma_bounds_check(&BridgeSpec::from_origin(y, 1.0).unwrap(), &band, &cfg).unwrap();
            assert!((r.time_bound - 0.24).abs() < 1e-15);
            assert!(r.ok, "{r:?}");
        }
    }

    #[test]
    fn tail_bound_is_negligible() {
        assert!(tail_moment(1.0, 6.0, 5.0) < 1e-7);
    }
}
