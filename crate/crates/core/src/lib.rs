//! Core data model and physics baselines for final burnt-area prediction.
//!
//! * [`raster`] holds the grid types (masks, real fields, environmental
//!   stacks, fire events), resampling, rotation augmentation and the on-disk
//!   formats shared by every predictor.
//! * [`metrics`] scores a predicted field against a true burnt mask (BCE,
//!   MSE, RRMSE, SSIM, PSNR).
//! * [`ca`] is the stochastic cellular-automaton spread baseline.
//! * [`mtt`] is the minimum-travel-time growth baseline.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below pin the
//! common instantiations.

pub mod ca;
pub mod error;
pub mod metrics;
pub mod mtt;
pub mod raster;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use raster::{BurntMask, Channel, EnvStack, Field, FireEvent, GridSpec};

/// Single-precision real grid.
pub type Field32 = raster::Field<f32>;
/// Double-precision real grid.
pub type Field64 = raster::Field<f64>;
/// Metric report computed in double precision.
pub type MetricReport64 = metrics::MetricReport<f64>;
/// Metric report computed in single precision.
pub type MetricReport32 = metrics::MetricReport<f32>;
