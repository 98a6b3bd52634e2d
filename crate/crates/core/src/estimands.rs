//! What the difference-in-means estimator targets under each measurement
//! strategy, as functionals of the effect curve and the exposure
//! distribution. Evaluation is quadrature only; nothing here samples.

use alloc::vec::Vec;

use crate::curves::EffectCurve;
use crate::error::{Error, Result};
use crate::exposure::ExposureDistribution;
use crate::metrics::MeasurementStrategy;

/// Cumulative-metric estimand `∫₀ᵗ Δ(t−e) dF_E(e) / F_E(t)`.
pub fn tau_cumulative(curve: &EffectCurve, dist: &ExposureDistribution, t: f64) -> Result<f64> {
    let mass = exposed_mass(dist, t)?;
    let area = dist.integrate_range_split(
        |e| curve.cum(t - e),
        f64::NEG_INFINITY,
        t,
        &curve.kinks_before(t),
    )?;
    Ok(area / mass)
}

/// Windowed-metric estimand `Δ(ν)`. It depends on neither the exposure
/// distribution nor the analysis time.
pub fn tau_windowed(curve: &EffectCurve, nu: f64) -> Result<f64> {
    check_window(nu)?;
    Ok(curve.cum(nu))
}

/// Cumulative-windowed estimand
/// `[Δ(ν)·F_E(t−ν) + ∫_{(t−ν, t]} Δ(t−e) dF_E(e)] / F_E(t)`.
pub fn tau_cumulative_windowed(
    curve: &EffectCurve,
    dist: &ExposureDistribution,
    nu: f64,
    t: f64,
) -> Result<f64> {
    check_window(nu)?;
    let mass = exposed_mass(dist, t)?;
    let settled = if t - nu >= 0.0 {
        curve.cum(nu) * dist.cdf(t - nu)
    } else {
        0.0
    };
    let lower = if t - nu >= 0.0 {
        t - nu
    } else {
        f64::NEG_INFINITY
    };
    let recent =
        dist.integrate_range_split(|e| curve.cum(t - e), lower, t, &curve.kinks_before(t))?;
    Ok((settled + recent) / mass)
}

/// Estimand for `strategy` at time `t`, or `None` where it does not exist.
///
/// The windowed estimand exists only for `t > ν` with some exposure mass at
/// or before `t − ν`; the other two need `F_E(t) > 0`.
pub fn estimand(
    curve: &EffectCurve,
    dist: &ExposureDistribution,
    strategy: MeasurementStrategy,
    t: f64,
) -> Result<Option<f64>> {
    strategy.validate()?;
    let value = match strategy {
        MeasurementStrategy::Cumulative => tau_cumulative(curve, dist, t),
        MeasurementStrategy::Windowed { nu } => {
            if t <= nu || dist.cdf(t - nu) <= 0.0 {
                return Ok(None);
            }
            tau_windowed(curve, nu)
        }
        MeasurementStrategy::CumulativeWindowed { nu } => {
            tau_cumulative_windowed(curve, dist, nu, t)
        }
    };
    match value {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedConditional { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// An estimand evaluated over a grid of analysis times; `None` marks times
/// where the estimand does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimandCurve {
    pub strategy: MeasurementStrategy,
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl EstimandCurve {
    pub fn window(&self) -> Option<f64> {
        self.strategy.window()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Option<f64>)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }
}

pub fn estimand_curve(
    curve: &EffectCurve,
    dist: &ExposureDistribution,
    strategy: MeasurementStrategy,
    grid: &[f64],
) -> Result<EstimandCurve> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be sorted ascending".into(),
        ));
    }
    let values = grid
        .iter()
        .map(|&t| estimand(curve, dist, strategy, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimandCurve {
        strategy,
        times: grid.to_vec(),
        values,
    })
}

/// Weight `w(e, s, t) = P(E = e) / F_E(s) · 1(s = t)` that the cumulative
/// estimand places on the group-time effect of the cohort exposed at `e`.
pub fn group_time_weight(dist: &ExposureDistribution, e: f64, s: f64, t: f64) -> Result<f64> {
    if !dist.is_discrete() {
        return Err(Error::Unsupported(
            "group-time weights need a discrete exposure distribution",
        ));
    }
    let mass = exposed_mass(dist, s)?;
    if s != t || e > t {
        return Ok(0.0);
    }
    Ok(dist
        .atoms()
        .into_iter()
        .find(|&(atom, _)| atom == e)
        .map_or(0.0, |(_, p)| p / mass))
}

/// Time-averaged treatment effect `Δ(t) / t`.
pub fn tate(curve: &EffectCurve, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("horizon t", "> 0", t));
    }
    Ok(curve.cum(t) / t)
}

/// Long-term effect rate `δ(t)` at a large `t`.
pub fn lte(curve: &EffectCurve, t_large: f64) -> Result<f64> {
    if !(t_large > 0.0) {
        return Err(Error::domain("horizon t", "> 0", t_large));
    }
    Ok(curve.delta(t_large))
}

/// Per-strategy description of who is measured at time `t` and what each
/// measured user contributes, used by the mixture-variance calculations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MeasurementProfile {
    strategy: MeasurementStrategy,
    t: f64,
    /// Users with `E <= cutoff` are measured.
    pub(crate) cutoff: f64,
}

impl MeasurementProfile {
    pub(crate) fn new(strategy: MeasurementStrategy, t: f64) -> Self {
        let cutoff = match strategy {
            MeasurementStrategy::Windowed { nu } => t - nu,
            _ => t,
        };
        MeasurementProfile {
            strategy,
            t,
            cutoff,
        }
    }

    /// Length of the measurement interval for a user exposed at `e`.
    pub(crate) fn span(&self, e: f64) -> f64 {
        let elapsed = (self.t - e).max(0.0);
        match self.strategy {
            MeasurementStrategy::Cumulative => elapsed,
            MeasurementStrategy::Windowed { nu } => nu,
            MeasurementStrategy::CumulativeWindowed { nu } => elapsed.min(nu),
        }
    }

    /// Exposure times where `span` or `effect` may have a kink.
    pub(crate) fn kinks(&self, curve: &EffectCurve) -> Vec<f64> {
        let mut points = curve.kinks_before(self.t);
        if let Some(nu) = self.strategy.window() {
            points.push(self.t - nu);
        }
        points
    }

    /// Expected treatment effect on the measurement of a user exposed at `e`.
    pub(crate) fn effect(&self, curve: &EffectCurve, e: f64) -> f64 {
        curve.cum(self.span(e))
    }
}

fn exposed_mass(dist: &ExposureDistribution, t: f64) -> Result<f64> {
    let mass = dist.cdf(t);
    if mass > 0.0 {
        Ok(mass)
    } else {
        Err(Error::UndefinedConditional { t })
    }
}

fn check_window(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("window nu", "> 0", nu))
    }
}
