//! Exit band geometry.

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, require_positive, Result};

/// Open interval `(lo, hi)`. Either end may be infinite for one-sided problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(domain("interval", hi - lo, "requires lo < hi"));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Symmetric band `(center - h, center + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredInterval {
    pub half_width: f64,
    pub center: f64,
}

impl CenteredInterval {
    pub fn new(half_width: f64, center: f64) -> Result<Self> {
        require_positive("h", half_width)?;
        require_finite("center", center)?;
        Ok(Self { half_width, center })
    }

    pub fn around_zero(half_width: f64) -> Result<Self> {
        Self::new(half_width, 0.0)
    }

    pub fn to_interval(self) -> Interval {
        Interval {
            lo: self.center - self.half_width,
            hi: self.center + self.half_width,
        }
    }
}

impl From<CenteredInterval> for Interval {
    fn from(c: CenteredInterval) -> Self {
        c.to_interval()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_reversed() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 0.1).is_ok());
    }

    #[test]
    fn centered_band() {
        let band = CenteredInterval::new(0.25, 1.0).unwrap().to_interval();
        assert_eq!(band, Interval { lo: 0.75, hi: 1.25 });
        assert!(band.contains(1.0));
        assert!(!band.contains(1.25));
        assert!(CenteredInterval::around_zero(0.0).is_err());
    }
}
