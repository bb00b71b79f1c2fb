//! Browser bindings: Kolmogorov curve, small-band limit scan, and sampled
//! bridge paths with Monte Carlo exit statistics.

use bridge_exit::exit_mean::{bessel_exit_mean_delta, bridge_exit_mean_band, BridgeSpec};
use bridge_exit::monte_carlo::{mc_exit, sample_brownian_bridge};
use bridge_exit::special_functions::{kolmogorov_cdf, KolmogorovMethod, SeriesControl};
use bridge_exit::{Interval, McConfig, QuadConfig};
use wasm_bindgen::prelude::*;

const MAX_PATHS: usize = 200_000;
const MAX_DRAWN: usize = 50;

fn check(cond: bool, msg: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_owned())
    }
}

/// Rows `(x, F_alternating, F_theta)` flattened.
pub fn kolmogorov_rows(x_min: f64, x_max: f64, points: usize) -> Result<Vec<f64>, String> {
    check(x_min > 0.0 && x_max > x_min, "need 0 < x_min < x_max")?;
    check((2..=2000).contains(&points), "points must be in 2..=2000")?;
    let ctrl = SeriesControl::default();
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let x = x_min + (x_max - x_min) * i as f64 / (points - 1) as f64;
        let a = kolmogorov_cdf(x, KolmogorovMethod::Alternating, &ctrl).map_err(|e| e.to_string())?;
        let t = kolmogorov_cdf(x, KolmogorovMethod::Theta, &ctrl).map_err(|e| e.to_string())?;
        out.extend([x, a.value, t.value]);
    }
    Ok(out)
}

/// Rows `(h, mean, mean / h^2)` for `h = h_max / 2^j`.
pub fn limit_rows(bessel: bool, y: f64, horizon: f64, h_max: f64, count: usize) -> Result<Vec<f64>, String> {
    check(horizon > 0.0 && h_max > 0.0, "T and h_max must be > 0")?;
    check((1..=8).contains(&count), "count must be in 1..=8")?;
    let cfg = QuadConfig::default();
    let mut out = Vec::with_capacity(3 * count);
    for j in 0..count {
        let h = h_max * 0.5f64.powi(j as i32);
        let mean = if bessel {
            bessel_exit_mean_delta(1.0, y, horizon, h, &cfg)
        } else {
            BridgeSpec::from_origin(y, horizon).and_then(|s| bridge_exit_mean_band(&s, &Interval::new(-h, h)?, &cfg))
        }
        .map_err(|e| e.to_string())?
        .value;
        out.extend([h, mean, mean / (h * h)]);
    }
    Ok(out)
}

/// Result of [`simulate_bridge`].
#[wasm_bindgen]
pub struct BridgeRun {
    paths: Vec<f64>,
    n_drawn: usize,
    n_points: usize,
    mean: f64,
    se: f64,
    reference: f64,
    prob_upper: f64,
    prob_no_exit: f64,
}

#[wasm_bindgen]
impl BridgeRun {
    /// Drawn paths, one after another, each `n_points` long.
    pub fn paths(&self) -> Vec<f64> {
        self.paths.clone()
    }
    pub fn n_drawn(&self) -> usize {
        self.n_drawn
    }
    pub fn n_points(&self) -> usize {
        self.n_points
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn se(&self) -> f64 {
        self.se
    }
    /// Quadrature mean exit time, NaN when the endpoint lies inside the band.
    pub fn reference(&self) -> f64 {
        self.reference
    }
    pub fn prob_upper(&self) -> f64 {
        self.prob_upper
    }
    pub fn prob_no_exit(&self) -> f64 {
        self.prob_no_exit
    }
}

pub fn run_bridge(y: f64, horizon: f64, h: f64, n_paths: usize, n_steps: usize, seed: u64) -> Result<BridgeRun, String> {
    check(n_paths <= MAX_PATHS, "at most 200000 paths in the browser")?;
    let spec = BridgeSpec::from_origin(y, horizon).map_err(|e| e.to_string())?;
    let band = Interval::new(-h, h).map_err(|e| e.to_string())?;
    let cfg = McConfig::new(n_paths, n_steps, seed).map_err(|e| e.to_string())?;
    let stats = mc_exit(&spec, &band, &cfg).map_err(|e| e.to_string())?;
    let reference = if y.abs() >= h {
        bridge_exit_mean_band(&spec, &band, &QuadConfig::default()).map_err(|e| e.to_string())?.value
    } else {
        f64::NAN
    };
    let n_drawn = n_paths.min(MAX_DRAWN);
    let mut paths = Vec::with_capacity(n_drawn * (n_steps + 1));
    for i in 0..n_drawn {
        paths.extend(sample_brownian_bridge(&spec, &cfg, i as u64).map_err(|e| e.to_string())?);
    }
    Ok(BridgeRun {
        paths,
        n_drawn,
        n_points: n_steps + 1,
        mean: stats.mean_exit_time,
        se: stats.se_exit_time,
        reference,
        prob_upper: stats.prob_upper_exit.mean,
        prob_no_exit: stats.prob_no_exit.mean,
    })
}

#[wasm_bindgen]
pub fn kolmogorov_curve(x_min: f64, x_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    kolmogorov_rows(x_min, x_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn limit_scan(process: &str, y: f64, horizon: f64, h_max: f64, count: usize) -> Result<Vec<f64>, JsError> {
    let bessel = match process {
        "bridge" => false,
        "bessel" => true,
        other => return Err(JsError::new(&format!("unknown process {other:?}"))),
    };
    limit_rows(bessel, y, horizon, h_max, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_bridge(y: f64, horizon: f64, h: f64, n_paths: usize, n_steps: usize, seed: u32) -> Result<BridgeRun, JsError> {
    run_bridge(y, horizon, h, n_paths, n_steps, u64::from(seed)).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_series_agree() {
        let rows = kolmogorov_rows(0.3, 3.0, 40).unwrap();
        assert_eq!(rows.len(), 120);
        for r in rows.chunks(3) {
            assert!((r[1] - r[2]).abs() < 1e-12);
        }
        assert!(kolmogorov_rows(-1.0, 3.0, 40).is_err());
    }

    #[test]
    fn limit_ratios_approach_one() {
        for bessel in [false, true] {
            let y = if bessel { 2.0 } else { 1.0 };
            let rows = limit_rows(bessel, y, 1.0, 0.4, 4).unwrap();
            let last = rows[rows.len() - 1];
            assert!((last - 1.0).abs() < 0.01, "{bessel}: {last}");
        }
    }

    #[test]
    fn bridge_run_is_seeded() {
        let a = run_bridge(1.0, 1.0, 0.1, 2000, 128, 5).unwrap();
        let b = run_bridge(1.0, 1.0, 0.1, 2000, 128, 5).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.paths.len(), MAX_DRAWN * 129);
        assert!(((a.mean - a.reference) / a.se).abs() < 4.0);
        let first = &a.paths[..129];
        assert_eq!(first[0], 0.0);
        assert_eq!(first[128], 1.0);
    }
}
