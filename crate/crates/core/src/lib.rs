//! Analytical and simulated downlink performance of cellular networks whose
//! base stations form a Poisson point process.
//!
//! The crate covers the closed-form coverage, potential spectral efficiency
//! (PSE) and energy efficiency (EE) expressions, the power and density
//! optimizers built on their stationarity conditions, and a Monte Carlo
//! simulator that checks the closed forms from first principles.
//!
//! Units are SI throughout: watts, hertz, metres and BS per square metre.

pub mod error;
pub mod mcsim;
pub mod metrics;
pub mod netmodel;
pub mod optimizer;
pub mod specfun;
pub mod units;

pub use error::{Error, Result};
pub use netmodel::{LoadModel, Network, PowerProfile, SystemParams};
