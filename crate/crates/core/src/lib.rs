//! Simulator core for a 3D non-stationary wideband geometry-based stochastic
//! channel model (GBSM) of MIMO vehicle-to-vehicle links.
//!
//! Scatterers live on two vertical cylinders that ride with the mobile
//! transmitter (MT) and receiver (MR) plus a family of confocal semi-ellipsoids
//! (one per delay tap) that model static roadside structures. The crate
//! provides:
//!
//! * scenario configuration, validation and the built-in measurement-campaign
//!   presets ([`scenario`]),
//! * the joint azimuth/elevation von Mises-Fisher scatterer density with
//!   sampling and marginals ([`vmf`], [`aoa`]),
//! * exact 3D path geometry together with the closed-form approximations of
//!   the per-ray travel distances ([`geometry`]),
//! * finite-scatterer (sum-of-sinusoids) channel realizations on a tapped
//!   delay line ([`realization`]),
//! * analytical channel statistics by numerical quadrature - time-variant
//!   space and frequency correlation functions, Doppler spectra and
//!   power-delay profiles - with Monte Carlo estimators as independent
//!   cross-checks ([`stats`]),
//! * plot-ready curve containers and CSV emission ([`curve`]).
//!
//! All randomness is driven by explicit 64-bit seeds and counter-based
//! sub-streams so that any `(config, seed)` pair reproduces bit-identical
//! output regardless of thread count.

pub mod aoa;
pub mod config_file;
pub mod curve;
pub mod exec;
pub mod geometry;
pub mod quadrature;
pub mod realization;
pub mod scenario;
pub mod special;
pub mod stats;
pub mod vmf;

pub use curve::CurveSeries;
pub use geometry::{PathModel, Point3};
pub use scenario::{ScenarioConfig, ValidatedScenario};
pub use vmf::VonMisesFisher;

/// Propagation speed used throughout the model, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
