//! Estimands and power of cumulative, windowed and cumulative-windowed A/B
//! test metrics when treatment effects vary with time since exposure.
//!
//! * [`curves`]: incremental and cumulative effect curves `δ`, `Δ`.
//! * [`exposure`]: exposure-time distributions and Stieltjes integration.
//! * [`estimands`]: what each metric's difference in means targets.
//! * [`power`]: mixture variances, expected Z statistics and normal power.
//! * [`metrics`]: measurements, group means and Z statistics on panels.
//! * [`simulator`]: Monte Carlo panels, power curves and estimand checks.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature runs
//! simulation replications on rayon's thread pool without changing results.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod curves;
pub mod error;
pub mod estimands;
pub mod exposure;
pub mod metrics;
pub mod power;
pub mod quadrature;
pub mod simulator;
pub mod special;

pub use curves::{EffectCurve, TabulatedCurve};
pub use error::{Error, Result};
pub use estimands::{
    estimand, estimand_curve, tau_cumulative, tau_cumulative_windowed, tau_windowed, EstimandCurve,
};
pub use exposure::{EmpiricalExposure, ExposureDistribution};
pub use metrics::{
    ExposureBoundary, Group, MeasurementStrategy, UserPanel, UserRecord, ZOptions, ZStatistic,
};
pub use power::{AnalyticScenario, CountSchedule, VarianceModel, ZConvention};
pub use simulator::{power_curve, simulate_panel, Scenario};
