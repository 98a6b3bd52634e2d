//! Normal-theory power for difference-in-means tests on time-growing metrics.
//!
//! The measurement variance is a mixture: conditional on exposure at `e`,
//! outcome noise grows linearly with the measured span, and the treatment
//! effect `Δ(t−e)` varies across exposure cohorts. The law of total variance
//! combines the two.

use alloc::vec::Vec;

use crate::curves::EffectCurve;
use crate::error::{Error, Result};
use crate::estimands::{tau_cumulative, MeasurementProfile};
use crate::exposure::ExposureDistribution;
use crate::metrics::MeasurementStrategy;
use crate::special::normal_cdf;

/// Outcome variance conditional on exposure time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceModel {
    /// `Var[Y(t) | E = e] = sigma2 · (t − e)`.
    LinearGrowth { sigma2: f64 },
}

impl VarianceModel {
    pub fn sigma2(&self) -> f64 {
        match *self {
            VarianceModel::LinearGrowth { sigma2 } => sigma2,
        }
    }
}

/// How the mean difference is standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZConvention {
    /// `diff / V`, the form under which the two-batch example is worked out.
    DivideByVariance,
    /// `diff / √V`, the usual test statistic.
    #[default]
    DivideByStandardDeviation,
}

impl ZConvention {
    pub fn standardize(self, diff: f64, variance: f64) -> f64 {
        match self {
            ZConvention::DivideByVariance => diff / variance,
            ZConvention::DivideByStandardDeviation => diff / libm::sqrt(variance),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZConvention::DivideByVariance => "variance",
            ZConvention::DivideByStandardDeviation => "sd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExposedCounts {
    pub treated: u64,
    pub control: u64,
}

/// Number of exposed users per arm at an analysis time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountSchedule {
    /// `round(n · F_E(cutoff))` per arm.
    #[default]
    Expected,
    Fixed(ExposedCounts),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticScenario {
    pub curve: EffectCurve,
    pub dist: ExposureDistribution,
    pub variance: VarianceModel,
    /// Treated users once everyone is exposed.
    pub n1: u64,
    /// Control users once everyone is exposed.
    pub n0: u64,
    pub z_convention: ZConvention,
}

/// Three-term split of the change in standardized cumulative effect between
/// two analysis times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecomposition {
    pub t: f64,
    pub t_prime: f64,
    /// Effect already accrued by `t`, re-weighted for the new variance and exposed share.
    pub term_variance_reweight: f64,
    /// Effect accrued on `(t, t']` by users exposed by `t`.
    pub term_new_time_old_users: f64,
    /// Users exposed in `(t, t']`.
    pub term_new_users: f64,
    pub total: f64,
    /// `τ_C(t')/√V_{t'} − τ_C(t)/√V_t` computed directly.
    pub direct: f64,
}

impl PowerDecomposition {
    pub fn gap(&self) -> f64 {
        self.total - self.direct
    }
}

impl AnalyticScenario {
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        self.dist.validate()?;
        let sigma2 = self.variance.sigma2();
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain("sigma2", "> 0", sigma2));
        }
        if self.n1 == 0 || self.n0 == 0 {
            return Err(Error::InvalidParameter(
                "n1 and n0 must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `Var(Y(t) | E <= t)` for the cumulative metric.
    pub fn mixture_variance(&self, t: f64) -> Result<f64> {
        self.mixture_variance_for(MeasurementStrategy::Cumulative, t)
    }

    /// Variance of a measured user's outcome under `strategy` at time `t`.
    ///
    /// Noise contributes `σ² · E[span | measured]`; the spread of expected
    /// effects across exposure cohorts contributes the second moment minus
    /// the squared first moment of `Δ(span)`.
    pub fn mixture_variance_for(&self, strategy: MeasurementStrategy, t: f64) -> Result<f64> {
        strategy.validate()?;
        let profile = MeasurementProfile::new(strategy, t);
        let mass = self.dist.cdf(profile.cutoff);
        if !(mass > 0.0) {
            return Err(Error::UndefinedConditional { t: profile.cutoff });
        }
        let kinks = profile.kinks(&self.curve);
        let below = |g: &dyn Fn(f64) -> f64| {
            self.dist
                .integrate_range_split(g, f64::NEG_INFINITY, profile.cutoff, &kinks)
        };
        let mean_span = match strategy {
            MeasurementStrategy::Cumulative => t - self.dist.conditional_mean_below(t)?,
            MeasurementStrategy::Windowed { nu } => nu,
            MeasurementStrategy::CumulativeWindowed { .. } => below(&|e| profile.span(e))? / mass,
        };
        let first = below(&|e| profile.effect(&self.curve, e))? / mass;
        let second = below(&|e| {
            let d = profile.effect(&self.curve, e);
            d * d
        })? / mass;
        let mut effect_var = second - first * first;
        if effect_var < 0.0 {
            if effect_var > -1e-12 {
                effect_var = 0.0;
            } else {
                return Err(Error::InvalidParameter(alloc::format!(
                    "negative effect variance {effect_var} at t = {t}"
                )));
            }
        }
        Ok(self.variance.sigma2() * mean_span + effect_var)
    }

    /// `V_t`, the variance of the mean difference with `n1_t` and `n0_t`
    /// measured users.
    pub fn estimator_variance(&self, t: f64, n1_t: u64, n0_t: u64) -> Result<f64> {
        self.estimator_variance_for(MeasurementStrategy::Cumulative, t, n1_t, n0_t)
    }

    pub fn estimator_variance_for(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        n1_t: u64,
        n0_t: u64,
    ) -> Result<f64> {
        if n1_t == 0 || n0_t == 0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "exposed counts must be positive, got treated {n1_t}, control {n0_t}"
            )));
        }
        let var = self.mixture_variance_for(strategy, t)?;
        Ok(var / n1_t as f64 + var / n0_t as f64)
    }

    /// Exposed users per arm at `t` under `schedule` for the cumulative metric.
    pub fn exposed_counts(&self, t: f64, schedule: CountSchedule) -> ExposedCounts {
        self.exposed_counts_for(MeasurementStrategy::Cumulative, t, schedule)
    }

    pub fn exposed_counts_for(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        schedule: CountSchedule,
    ) -> ExposedCounts {
        match schedule {
            CountSchedule::Fixed(counts) => counts,
            CountSchedule::Expected => {
                let share = self.dist.cdf(MeasurementProfile::new(strategy, t).cutoff);
                ExposedCounts {
                    treated: libm::round(self.n1 as f64 * share) as u64,
                    control: libm::round(self.n0 as f64 * share) as u64,
                }
            }
        }
    }

    /// Expected Z statistic of the cumulative metric at `t`, using the
    /// scenario's standardization convention.
    pub fn expected_z(&self, t: f64, schedule: CountSchedule) -> Result<f64> {
        self.expected_z_for(MeasurementStrategy::Cumulative, t, schedule)
    }

    pub fn expected_z_for(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        schedule: CountSchedule,
    ) -> Result<f64> {
        let effect = crate::estimands::estimand(&self.curve, &self.dist, strategy, t)?
            .ok_or(Error::UndefinedConditional { t })?;
        let counts = self.exposed_counts_for(strategy, t, schedule);
        let v = self.estimator_variance_for(strategy, t, counts.treated, counts.control)?;
        if !(v > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        Ok(self.z_convention.standardize(effect, v))
    }

    /// Splits `τ_C(t')/√V_{t'} − τ_C(t)/√V_t` into the contribution of
    /// re-weighting already-accrued effects, of new time for already-exposed
    /// users, and of newly exposed users. Always standardizes by `√V`.
    pub fn decompose(
        &self,
        t: f64,
        t_prime: f64,
        schedule: CountSchedule,
    ) -> Result<PowerDecomposition> {
        if !(t > 0.0 && t < t_prime) {
            return Err(Error::InvalidParameter(alloc::format!(
                "decomposition needs 0 < t < t', got t = {t}, t' = {t_prime}"
            )));
        }
        let mass = self.dist.cdf(t);
        let mass_prime = self.dist.cdf(t_prime);
        if !(mass > 0.0) {
            return Err(Error::UndefinedConditional { t });
        }
        let counts = self.exposed_counts(t, schedule);
        let counts_prime = self.exposed_counts(t_prime, schedule);
        let v = self.estimator_variance(t, counts.treated, counts.control)?;
        let v_prime =
            self.estimator_variance(t_prime, counts_prime.treated, counts_prime.control)?;

        let scale = 1.0 / (libm::sqrt(v) * mass);
        let scale_prime = 1.0 / (libm::sqrt(v_prime) * mass_prime);

        let curve = &self.curve;
        let (kinks, kinks_prime) = (curve.kinks_before(t), curve.kinks_before(t_prime));
        let both: Vec<f64> = kinks.iter().chain(&kinks_prime).copied().collect();
        let dist = &self.dist;
        let accrued =
            dist.integrate_range_split(|e| curve.cum(t - e), f64::NEG_INFINITY, t, &kinks)?;
        let extension = dist.integrate_range_split(
            |e| curve.cum(t_prime - e) - curve.cum(t - e),
            f64::NEG_INFINITY,
            t,
            &both,
        )?;
        let newcomers =
            dist.integrate_range_split(|e| curve.cum(t_prime - e), t, t_prime, &kinks_prime)?;

        let term_variance_reweight = (scale_prime - scale) * accrued;
        let term_new_time_old_users = scale_prime * extension;
        let term_new_users = scale_prime * newcomers;
        let direct = tau_cumulative(curve, &self.dist, t_prime)? / libm::sqrt(v_prime)
            - tau_cumulative(curve, &self.dist, t)? / libm::sqrt(v);

        Ok(PowerDecomposition {
            t,
            t_prime,
            term_variance_reweight,
            term_new_time_old_users,
            term_new_users,
            total: term_variance_reweight + term_new_time_old_users + term_new_users,
            direct,
        })
    }
}

/// Closed-form expected Z for the two-batch example: 1,000 users split
/// evenly, half exposed at day 0 and half at day 7, a constant effect `c`
/// for the first seven days after exposure, linear variance growth `σ²`,
/// standardized by the variance.
pub fn example2_expected_z(c: f64, sigma2: f64, t: f64) -> f64 {
    if t < 7.0 {
        125.0 * c / sigma2
    } else if t < 14.0 {
        125.0 * t * c / (sigma2 * (t - 3.5) + 0.25 * c * c * (t - 14.0) * (t - 14.0))
    } else {
        250.0 * 7.0 * c / (sigma2 * (t - 3.5))
    }
}

/// Power of the one-sided test `Z > critical`: `1 − Φ(critical − E[Z])`.
pub fn power_one_sided(expected_z: f64, critical: f64) -> f64 {
    normal_cdf(expected_z - critical)
}

/// Power of the two-sided test `|Z| > critical`.
pub fn power_two_sided(expected_z: f64, critical: f64) -> f64 {
    normal_cdf(expected_z - critical) + normal_cdf(-expected_z - critical)
}
