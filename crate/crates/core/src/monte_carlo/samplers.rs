//! Grid steppers for each path law. A stepper maps the state at `t0` to a
//! draw of the state at `t1`.

use super::engine::{Flow, Point, Scanner, Watcher};
use super::rng::{normal, uniform, PathRng};
use crate::exit_mean::DiffusionModel;

/// Uniform time grid on `[0, horizon]` whose last node is exactly `horizon`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub horizon: f64,
    pub n: usize,
}

impl Grid {
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n {
            self.horizon
        } else {
            self.horizon * i as f64 / self.n as f64
        }
    }
}

/// Walks the grid, scanning every step. Returns the final state, or `None`
/// when the watcher stopped the path.
pub(crate) fn drive<P: Point, W: Watcher>(
    grid: &Grid,
    start: P,
    scanner: &Scanner,
    watcher: &mut W,
    rng: &mut PathRng,
    mut step: impl FnMut(f64, f64, &P, &mut PathRng) -> P,
    sigma2: impl Fn(&P) -> f64,
) -> Option<P> {
    let mut p = start;
    for i in 0..grid.n {
        let (t0, t1) = (grid.time(i), grid.time(i + 1));
        let next = step(t0, t1, &p, rng);
        if scanner.segment(t0, p, t1, next, sigma2(&p), 0, watcher, rng) == Flow::Stop {
            return None;
        }
        p = next;
    }
    Some(p)
}

/// Grid values only, no barrier scanning.
pub(crate) fn grid_path<P: Point>(
    grid: &Grid,
    start: P,
    rng: &mut PathRng,
    mut step: impl FnMut(f64, f64, &P, &mut PathRng) -> P,
) -> Vec<P> {
    let mut out = Vec::with_capacity(grid.n + 1);
    out.push(start);
    let mut p = start;
    for i in 0..grid.n {
        p = step(grid.time(i), grid.time(i + 1), &p, rng);
        out.push(p);
    }
    out
}

/// Exact sequential conditioning of a Brownian bridge ending at `end` at `horizon`.
pub(crate) fn bridge_step(end: f64, horizon: f64) -> impl Fn(f64, f64, &f64, &mut PathRng) -> f64 {
    move |t0, t1, &v, rng| {
        if t1 >= horizon {
            return end;
        }
        let rest = horizon - t0;
        let dt = t1 - t0;
        v + (end - v) * dt / rest + (dt * (horizon - t1) / rest).sqrt() * normal(rng)
    }
}

/// Bridge through the clock change `B_t = (1 - t/T) W(T t / (T - t)) + x + (y - x) t / T`.
pub(crate) fn time_change_step(start: f64, end: f64, horizon: f64) -> impl FnMut(f64, f64, &f64, &mut PathRng) -> f64 {
    let mut w = 0.0;
    let mut clock = 0.0;
    move |_t0, t1, _v, rng| {
        if t1 >= horizon {
            return end;
        }
        let s = horizon * t1 / (horizon - t1);
        w += (s - clock).sqrt() * normal(rng);
        clock = s;
        (1.0 - t1 / horizon) * w + start + (end - start) * t1 / horizon
    }
}

pub(crate) fn brownian_step(t0: f64, t1: f64, v: &f64, rng: &mut PathRng) -> f64 {
    v + (t1 - t0).sqrt() * normal(rng)
}

/// Euler–Maruyama step for `dX = b dt + a dW`.
pub(crate) fn euler_step(model: &DiffusionModel) -> impl Fn(f64, f64, &f64, &mut PathRng) -> f64 + '_ {
    move |t0, t1, &v, rng| {
        let dt = t1 - t0;
        v + model.drift(v) * dt + model.diffusion(v) * dt.sqrt() * normal(rng)
    }
}

/// Cosine of the angle between the start and end points of a 3-d Brownian
/// bridge whose end is uniform on the sphere of radius `y` reweighted by the
/// Gaussian kernel: density proportional to `exp(kappa c)` on `[-1, 1]`.
pub(crate) fn sample_cos_angle(kappa: f64, rng: &mut PathRng) -> f64 {
    let u = uniform(rng);
    if kappa == 0.0 {
        return 2.0 * u - 1.0;
    }
    (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0)
}

/// Start and end points of the 3-d bridge whose norm is a Bessel(3) bridge
/// from `x` to `y` over `horizon`.
pub(crate) fn radial_endpoints(x: f64, y: f64, horizon: f64, rng: &mut PathRng) -> ([f64; 3], [f64; 3]) {
    let c = sample_cos_angle(x * y / horizon, rng);
    let s = (1.0 - c * c).max(0.0).sqrt();
    ([x, 0.0, 0.0], [y * c, y * s, 0.0])
}

pub(crate) fn radial_bridge_step(end: [f64; 3], horizon: f64) -> impl Fn(f64, f64, &[f64; 3], &mut PathRng) -> [f64; 3] {
    move |t0, t1, v, rng| {
        if t1 >= horizon {
            return end;
        }
        let rest = horizon - t0;
        let dt = t1 - t0;
        let sd = (dt * (horizon - t1) / rest).sqrt();
        std::array::from_fn(|i| v[i] + (end[i] - v[i]) * dt / rest + sd * normal(rng))
    }
}

/// Drift of the Bessel(3) bridge to `y`: `(y - x)/tau + (2y/tau) / expm1(2xy/tau)`.
pub(crate) fn bessel_bridge_drift(x: f64, y: f64, tau: f64) -> f64 {
    let k = 2.0 * x * y / tau;
    let pull = if k == 0.0 { 1.0 / x } else { (2.0 * y / tau) / k.exp_m1() };
    (y - x) / tau + pull
}

/// Euler step for the Bessel(3) bridge with reflection at 0. From 0 the
/// first step uses the entrance law `sqrt(dt) |N_3|`.
pub(crate) fn bessel_euler_step(end: f64, horizon: f64) -> impl Fn(f64, f64, &f64, &mut PathRng) -> f64 {
    move |t0, t1, &v, rng| {
        if t1 >= horizon {
            return end;
        }
        let dt = t1 - t0;
        if v <= 0.0 {
            let (a, b, c) = (normal(rng), normal(rng), normal(rng));
            return dt.sqrt() * (a * a + b * b + c * c).sqrt();
        }
        let next = v + bessel_bridge_drift(v, end, horizon - t0) * dt + dt.sqrt() * normal(rng);
        next.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::super::rng::path_rng;
    use super::*;

    #[test]
    fn grid_ends_exactly_at_horizon() {
        let g = Grid { horizon: 0.3, n: 7 };
        assert_eq!(g.time(7), 0.3);
        assert_eq!(g.time(0), 0.0);
    }

    #[test]
    fn bridge_paths_hit_endpoint() {
        let g = Grid { horizon: 2.0, n: 16 };
        let mut rng = path_rng(1, 0);
        let p = grid_path(&g, 0.5, &mut rng, bridge_step(-1.25, 2.0));
        assert_eq!(p[16], -1.25);
        let mut tc = time_change_step(0.5, -1.25, 2.0);
        let q = grid_path(&g, 0.5, &mut rng, |a, b, v, r| tc(a, b, v, r));
        assert_eq!(q[16], -1.25);
    }

    #[test]
    fn cos_angle_in_range_and_biased_forward() {
        let mut rng = path_rng(5, 0);
        let n = 20000;
        let mean: f64 = (0..n).map(|_| sample_cos_angle(2.0, &mut rng)).sum::<f64>() / n as f64;
        // E[c] = coth(k) - 1/k
        let exact = 1.0 / 2f64.tanh() - 0.5;
        assert!((mean - exact).abs() < 0.02, "{mean} vs {exact}");
        for _ in 0..1000 {
            let c = sample_cos_angle(800.0, &mut rng);
            assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn bessel_drift_matches_log_derivative() {
        // finite-difference derivative of ln(p(x,y) - p(x,-y))
        let (x, y, tau) = (0.7, 1.3, 0.4);
        let f = |x: f64| (((-(y - x) * (y - x) / (2.0 * tau)).exp()) - ((-(y + x) * (y + x) / (2.0 * tau)).exp())).ln();
        let eps = 1e-6;
        let fd = (f(x + eps) - f(x - eps)) / (2.0 * eps);
        assert!((bessel_bridge_drift(x, y, tau) - fd).abs() < 1e-7);
    }
}
