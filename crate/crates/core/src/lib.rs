//! Locally differentially private estimation of the autocovariance function
//! and spectral density of centered stationary Gaussian time series.
//!
//! The crate is split along the data flow of a private estimation run:
//!
//! - [`model`]: covariance/spectral conversions and tuning schedules.
//! - [`procgen`]: exact sampling of stationary Gaussian paths.
//! - [`mech`]: the non-interactive and sequentially interactive privatizers,
//!   plus exact verifiers of their privacy and moment properties.
//! - [`estim`]: estimators built on privatized transcripts, non-private
//!   baselines and the positive semi-definite Toeplitz covariance estimate.
//! - [`bench`]: the Monte Carlo harness producing MSE-versus-α tables.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bench;
pub mod error;
pub mod estim;
pub mod io;
pub mod mech;
pub mod model;
pub mod procgen;

pub use error::{Error, Result};
