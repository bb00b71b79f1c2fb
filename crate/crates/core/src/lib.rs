//! First-exit-time statistics of Brownian bridges, Bessel(3) bridges and
//! scalar diffusions from a symmetric band, with series, quadrature and
//! Monte Carlo routes that cross-check one another.

pub mod error;
pub mod exit_mean;
pub mod interval;
pub mod monte_carlo;
pub mod quadrature;
pub mod special_functions;
pub mod walsh;

pub use error::{Error, Result};
pub use exit_mean::{BridgeSpec, DiffusionModel, LimitScanRow};
pub use interval::{CenteredInterval, Interval};
pub use quadrature::{EndpointSubstitution, IntegralResult, QuadConfig};
pub use special_functions::{KernelMethod, KolmogorovMethod, SeriesControl, SeriesValue};
pub use monte_carlo::{BesselScheme, BridgeSampler, Estimate, ExitStats, LastPassageSamples, McConfig, WalkEmbedding};
pub use walsh::{ExitPositionRoute, GridGeometry, PayoffSpec};
