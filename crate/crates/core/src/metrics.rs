//! Per-user measurements, group means and Z statistics on experiment panels.
//!
//! A panel stores, for every user, one outcome increment per day; day `d`
//! covers the interval `(d, d + 1]`. On the exposure day only the part after
//! exposure is observed, so that day's increment is treated as spread evenly
//! over `(e, ⌊e⌋ + 1]`. Measurement windows that end inside a day take the
//! matching fraction of that day's increment.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::power::{AnalyticScenario, ZConvention};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementStrategy {
    /// Everything since exposure.
    Cumulative,
    /// The first `nu` days after exposure, reported only once complete.
    Windowed { nu: f64 },
    /// Everything since exposure, capped at `nu` days.
    CumulativeWindowed { nu: f64 },
}

impl MeasurementStrategy {
    pub fn validate(&self) -> Result<()> {
        match self.window() {
            Some(nu) if !(nu > 0.0 && nu.is_finite()) => Err(Error::domain("window nu", "> 0", nu)),
            _ => Ok(()),
        }
    }

    pub fn window(&self) -> Option<f64> {
        match *self {
            MeasurementStrategy::Cumulative => None,
            MeasurementStrategy::Windowed { nu }
            | MeasurementStrategy::CumulativeWindowed { nu } => Some(nu),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasurementStrategy::Cumulative => "cumulative",
            MeasurementStrategy::Windowed { .. } => "windowed",
            MeasurementStrategy::CumulativeWindowed { .. } => "cumulative_windowed",
        }
    }
}

impl fmt::Display for MeasurementStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.window() {
            Some(nu) => write!(f, "{}({nu})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Treatment,
    Control,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Treatment => "treatment",
            Group::Control => "control",
        })
    }
}

/// Whether a user exposed exactly at the analysis time counts as exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExposureBoundary {
    /// Exposed iff `e < t`.
    #[default]
    Strict,
    /// Exposed iff `e <= t`; such a user contributes an empty measurement.
    Inclusive,
}

impl ExposureBoundary {
    fn exposed(self, e: f64, t: f64) -> bool {
        match self {
            ExposureBoundary::Strict => e < t,
            ExposureBoundary::Inclusive => e <= t,
        }
    }
}

/// One user's row of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub id: u64,
    pub treated: bool,
    pub exposure: f64,
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct UserView<'a> {
    pub id: u64,
    pub treated: bool,
    pub exposure: f64,
    pub increments: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPanel {
    horizon: u32,
    ids: Vec<u64>,
    treated: Vec<bool>,
    exposure: Vec<f64>,
    // Row-major, `horizon` entries per user.
    increments: Vec<f64>,
    // Row-major, `horizon + 1` entries per user: sums of days before `d`.
    prefix: Vec<f64>,
}

impl UserPanel {
    pub fn new(horizon: u32, users: Vec<UserRecord>) -> Result<Self> {
        let n = users.len();
        let mut ids = Vec::with_capacity(n);
        let mut treated = Vec::with_capacity(n);
        let mut exposure = Vec::with_capacity(n);
        let mut increments = Vec::with_capacity(n * horizon as usize);
        for user in users {
            if user.increments.len() != horizon as usize {
                return Err(Error::InvalidPanel(format!(
                    "user {} has {} increments, expected {horizon}",
                    user.id,
                    user.increments.len()
                )));
            }
            ids.push(user.id);
            treated.push(user.treated);
            exposure.push(user.exposure);
            increments.extend(user.increments);
        }
        Self::from_columns(horizon, ids, treated, exposure, increments)
    }

    /// Builds a panel from column vectors; `increments` is row-major with
    /// `horizon` days per user.
    pub fn from_columns(
        horizon: u32,
        ids: Vec<u64>,
        treated: Vec<bool>,
        exposure: Vec<f64>,
        increments: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        let days = horizon as usize;
        if treated.len() != n || exposure.len() != n || increments.len() != n * days {
            return Err(Error::InvalidPanel("column lengths disagree".into()));
        }
        if let Some(&e) = exposure
            .iter()
            .find(|&&e| !(e >= 0.0 && e <= horizon as f64))
        {
            return Err(Error::InvalidPanel(format!(
                "exposure time {e} outside [0, {horizon}]"
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel("non-finite increment".into()));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidPanel(format!("duplicate user id {}", w[0])));
        }
        let mut prefix = Vec::with_capacity(n * (days + 1));
        for row in increments.chunks(days.max(1)).take(n) {
            let mut acc = 0.0;
            prefix.push(acc);
            for &v in row.iter().take(days) {
                acc += v;
                prefix.push(acc);
            }
        }
        if days == 0 {
            prefix.resize(n, 0.0);
        }
        Ok(UserPanel {
            horizon,
            ids,
            treated,
            exposure,
            increments,
            prefix,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn user(&self, index: usize) -> UserView<'_> {
        let days = self.horizon as usize;
        UserView {
            id: self.ids[index],
            treated: self.treated[index],
            exposure: self.exposure[index],
            increments: &self.increments[index * days..(index + 1) * days],
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserView<'_>> + '_ {
        (0..self.len()).map(move |i| self.user(i))
    }

    /// Outcome accumulated by user `index` from exposure up to time `x`.
    fn position(&self, index: usize, x: f64) -> f64 {
        let days = self.horizon as usize;
        let prefix = &self.prefix[index * (days + 1)..(index + 1) * (days + 1)];
        let day = (libm::floor(x) as usize).min(days);
        if day == days {
            return prefix[days];
        }
        let start = (day as f64).max(self.exposure[index]);
        let end = day as f64 + 1.0;
        let frac = if x > start {
            (x - start) / (end - start)
        } else {
            0.0
        };
        prefix[day] + frac * self.increments[index * days + day]
    }

    /// Measurement of user `index` at analysis time `t`, treating users
    /// exposed exactly at `t` as not yet exposed.
    pub fn measure(
        &self,
        index: usize,
        strategy: MeasurementStrategy,
        t: f64,
    ) -> Result<Option<f64>> {
        self.measure_with(index, strategy, t, ExposureBoundary::Strict)
    }

    pub fn measure_with(
        &self,
        index: usize,
        strategy: MeasurementStrategy,
        t: f64,
        boundary: ExposureBoundary,
    ) -> Result<Option<f64>> {
        self.check_time(t)?;
        strategy.validate()?;
        Ok(self.measure_unchecked(index, strategy, t, boundary))
    }

    fn measure_unchecked(
        &self,
        index: usize,
        strategy: MeasurementStrategy,
        t: f64,
        boundary: ExposureBoundary,
    ) -> Option<f64> {
        let e = self.exposure[index];
        if !boundary.exposed(e, t) {
            return None;
        }
        let end = match strategy {
            MeasurementStrategy::Cumulative => t,
            MeasurementStrategy::Windowed { nu } => {
                if e + nu > t {
                    return None;
                }
                e + nu
            }
            MeasurementStrategy::CumulativeWindowed { nu } => t.min(e + nu),
        };
        Some(self.position(index, end) - self.position(index, e))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t > self.horizon as f64 {
            return Err(Error::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn summarize(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        boundary: ExposureBoundary,
    ) -> Result<[RunningMoments; 2]> {
        self.check_time(t)?;
        strategy.validate()?;
        let mut groups = [RunningMoments::default(); 2];
        for i in 0..self.len() {
            if let Some(y) = self.measure_unchecked(i, strategy, t, boundary) {
                groups[usize::from(self.treated[i])].push(y);
            }
        }
        for (group, moments) in [(Group::Control, &groups[0]), (Group::Treatment, &groups[1])] {
            if moments.count == 0 {
                return Err(Error::InsufficientData { group, count: 0 });
            }
        }
        Ok(groups)
    }

    /// Group averages of the defined measurements at `t`.
    pub fn group_means(&self, strategy: MeasurementStrategy, t: f64) -> Result<GroupMeans> {
        self.group_means_with(strategy, t, ExposureBoundary::Strict)
    }

    pub fn group_means_with(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        boundary: ExposureBoundary,
    ) -> Result<GroupMeans> {
        let [control, treated] = self.summarize(strategy, t, boundary)?;
        Ok(GroupMeans {
            mean1: treated.mean,
            mean0: control.mean,
            n1: treated.count,
            n0: control.count,
        })
    }

    pub fn z_statistic(
        &self,
        strategy: MeasurementStrategy,
        t: f64,
        options: &ZOptions<'_>,
    ) -> Result<ZStatistic> {
        let [control, treated] = self.summarize(strategy, t, options.boundary)?;
        let diff = treated.mean - control.mean;
        let variance = match options.variance {
            VarianceMode::Estimated => {
                for (group, m) in [(Group::Treatment, &treated), (Group::Control, &control)] {
                    if m.count < 2 {
                        return Err(Error::InsufficientData {
                            group,
                            count: m.count,
                        });
                    }
                }
                let v = treated.sample_variance() / treated.count as f64
                    + control.sample_variance() / control.count as f64;
                if !(v > 0.0) {
                    return Err(Error::DegenerateVariance);
                }
                v
            }
            VarianceMode::Known(model) => model.estimator_variance_for(
                strategy,
                t,
                treated.count as u64,
                control.count as u64,
            )?,
            VarianceMode::KnownOutcome(outcome) => {
                outcome / treated.count as f64 + outcome / control.count as f64
            }
        };
        Ok(ZStatistic {
            diff,
            variance,
            z: options.convention.standardize(diff, variance),
            n1: treated.count,
            n0: control.count,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMeans {
    pub mean1: f64,
    pub mean0: f64,
    pub n1: usize,
    pub n0: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZStatistic {
    pub diff: f64,
    pub variance: f64,
    pub z: f64,
    pub n1: usize,
    pub n0: usize,
}

/// Source of the variance of the mean difference.
#[derive(Debug, Clone, Copy)]
pub enum VarianceMode<'a> {
    /// Sample variances of the two groups.
    Estimated,
    /// Mixture variance implied by a known model, with the observed counts.
    Known(&'a AnalyticScenario),
    /// A known per-user outcome variance, already evaluated for this
    /// strategy and time.
    KnownOutcome(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct ZOptions<'a> {
    pub variance: VarianceMode<'a>,
    pub convention: ZConvention,
    pub boundary: ExposureBoundary,
}

impl Default for ZOptions<'_> {
    fn default() -> Self {
        ZOptions {
            variance: VarianceMode::Estimated,
            convention: ZConvention::DivideByStandardDeviation,
            boundary: ExposureBoundary::Strict,
        }
    }
}

// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn sample_variance(&self) -> f64 {
        self.m2 / (self.count as f64 - 1.0)
    }
}
