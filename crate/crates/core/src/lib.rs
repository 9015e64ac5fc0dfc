//! Deconvolution kernel density estimation for data observed with
//! supersmooth (Gaussian-type) measurement error.
//!
//! Observations are `X = Y + Z` with `Z` drawn from a known error density.
//! The estimator divides the empirical characteristic function of the sample
//! by the error characteristic function, damps the quotient with a
//! compactly supported kernel transform and inverts.
//!
//! The numerical core (kernels, error models, targets, quadrature, the
//! estimator, exact MISE and the asymptotic variance formulas) is generic
//! over the scalar type through [`Real`]; the Monte Carlo harness and the
//! file formats work in `f64`. Concrete aliases for both precisions live at
//! the crate root.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bandwidth;
pub mod config;
mod error;
pub mod estimator;
pub mod kernels;
pub mod noise;
pub mod quadrature;
mod scalar;
pub mod simulation;
pub mod special;
pub mod targets;

pub use error::{Error, Result};
pub use scalar::Real;

pub use asymptotics::{AsymptoticSpec, StatisticVariant};
pub use bandwidth::MiseCurve;
pub use estimator::{EstimateGrid, EstimatorConfig, GridSpec};
pub use kernels::Kernel;
pub use noise::ErrorModel;
pub use simulation::{StudyConfig, StudyReport};
pub use targets::TargetDensity;

pub type Kernel64 = Kernel<f64>;
pub type Kernel32 = Kernel<f32>;
pub type ErrorModel64 = ErrorModel<f64>;
pub type ErrorModel32 = ErrorModel<f32>;
pub type TargetDensity64 = TargetDensity<f64>;
pub type TargetDensity32 = TargetDensity<f32>;
pub type EstimatorConfig64 = EstimatorConfig<f64>;
pub type EstimatorConfig32 = EstimatorConfig<f32>;
pub type EstimateGrid64 = EstimateGrid<f64>;
pub type MiseCurve64 = MiseCurve<f64>;
pub type AsymptoticSpec64 = AsymptoticSpec<f64>;
