//! Conditional Value-at-Risk in GARCH(1,1) and threshold GARCH(1,1) models:
//! two-step quasi-maximum-likelihood estimation, asymptotic and residual
//! bootstrap confidence intervals, and Monte Carlo coverage experiments.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! experiment, rolling-window and data layers work in `f64`.
//!
//! ```
//! use varboot::{fit_two_step, simulate_path, var_point_estimate, FitConfig, InnovationDist, ModelSpec};
//!
//! let spec = ModelSpec::garch(0.05, 0.1, 0.85).unwrap();
//! let path = simulate_path(&spec, InnovationDist::StandardNormal, 1_000, 200, 42).unwrap();
//! let fit = fit_two_step(&path.series, spec.family(), 0.05, &FitConfig::default()).unwrap();
//! let var = var_point_estimate(&fit);
//! assert!(var.value > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bootstrap;
pub mod data;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod quadrature;
pub mod rolling;
pub mod scalar;
pub mod seed;
pub mod stats;

pub use asymptotics::{
    asymptotic_interval, plug_in_components, population_components, sigma_alpha_matrix, AsymptoticInterval,
    KdeBandwidth, PopulationComponents, SigmaAlphaComponents, SigmaAlphaMatrix,
};
pub use bootstrap::{
    build_intervals, run_bootstrap, BootstrapConfig, BootstrapOutcome, Design, EstimatorMode, Interval, IntervalSet,
};
pub use data::{load_prices, load_returns, to_returns, CsvFormat, DatedReturns, PriceSeries};
pub use distribution::InnovationDist;
pub use error::{Error, Result};
pub use estimation::{
    empirical_quantile, estimate_theta, fit_two_step, var_point_estimate, FitConfig, FitResult, VarEstimate,
};
pub use model::{filter_sigma, simulate_path, ModelFamily, ModelSpec, Presample, ReturnSeries, SigmaPath};
pub use montecarlo::{run_experiment, CoverageReport, ExperimentConfig, Preset};
pub use rolling::{rolling_var, RollingConfig, WindowRecord};
pub use scalar::Scalar;

pub type ModelSpec64 = ModelSpec<f64>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type ReturnSeries64 = ReturnSeries<f64>;
pub type ReturnSeries32 = ReturnSeries<f32>;
pub type FitResult64 = FitResult<f64>;
pub type FitResult32 = FitResult<f32>;
pub type BootstrapOutcome64 = BootstrapOutcome<f64>;
pub type IntervalSet64 = IntervalSet<f64>;
