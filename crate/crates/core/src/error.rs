use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{name} = {value} is outside the domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// The bridge endpoint lies inside the band, so the bridge stays inside with
    /// positive probability and the mean exit time diverges.
    #[error("mean exit time is infinite: endpoint {end} lies inside the band ({lo}, {hi})")]
    InfiniteMean { end: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        reason,
    }
}

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(name, value, "must be finite and > 0"))
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(domain(name, value, "must be finite"))
    }
}
