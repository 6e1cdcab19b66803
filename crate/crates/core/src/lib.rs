//! Forecasting of high-dimensional daily realized covariance matrices.
//!
//! The pipeline implemented here goes from raw tick data to out-of-sample
//! covariance forecasts:
//!
//! 1. [`market_data`] — parse, clean and resample tick series into
//!    synchronized intraday log-return panels.
//! 2. [`rcov`] — accumulate the panels into daily realized covariance
//!    matrices and regularize them (thresholding, PSD repair).
//! 3. [`factor`] — reduce dimension with a matrix factor model
//!    `Sigma_x(t) = A Sigma_f(t) A' + Sigma_0` estimated by eigendecomposition
//!    of the scatter of the daily matrices.
//! 4. [`caw`] — fit a diagonal conditional autoregressive Wishart model to
//!    the factor covariance series by maximum likelihood and forecast it.
//! 5. [`var`] — the benchmark: a VAR fitted by least squares to the
//!    half-vectorized factor series, with order-selection criteria.
//! 6. [`evaluation`] — rolling re-estimation harness comparing the models
//!    under Frobenius and spectral norms.
//! 7. [`simulation`] — synthetic data generators used as oracles for every
//!    estimator in the crate.
//!
//! All file formats, configuration and orchestration live in the companion
//! CLI crate; this crate is pure computation.

pub mod caw;
pub mod evaluation;
pub mod factor;
pub mod linalg;
pub mod market_data;
pub mod optim;
pub mod rcov;
pub mod simulation;
pub mod var;

mod day;
mod seeds;

pub use day::DayId;
pub use seeds::derive_seed;
