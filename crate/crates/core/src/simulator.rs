//! Monte Carlo experiments: panel generation, power curves and large-sample
//! estimand checks.
//!
//! Replication `r` draws from a ChaCha8 stream seeded with the scenario seed
//! and switched to stream number `r`, so results do not depend on how
//! replications are scheduled across threads.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::curves::EffectCurve;
use crate::error::{Error, Result};
use crate::exposure::ExposureDistribution;
use crate::metrics::{ExposureBoundary, MeasurementStrategy, UserPanel, VarianceMode, ZOptions};
use crate::power::{AnalyticScenario, VarianceModel, ZConvention};
use crate::special::normal_quantile;

/// Replication count used when a scenario does not say otherwise.
pub const DEFAULT_REPLICATIONS: usize = 2_000;
/// Replication count of the original study.
pub const FULL_REPLICATIONS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assignment {
    Bernoulli {
        p: f64,
    },
    /// First `⌊n/2⌋` users treated, the rest control.
    ExactSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    /// Reject when `Z > z_{1-α}`.
    One,
    /// Reject when `|Z| > z_{1-α/2}`.
    #[default]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestVariance {
    /// Mixture variance from the scenario's own generating model.
    Known,
    #[default]
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_users: usize,
    pub assignment: Assignment,
    pub exposure: ExposureDistribution,
    pub curve: EffectCurve,
    /// Standard deviation of one full day's outcome noise.
    pub noise_sigma: f64,
    pub horizon_days: u32,
    pub strategies: Vec<MeasurementStrategy>,
    pub alpha: f64,
    pub sidedness: Sidedness,
    pub replications: usize,
    pub seed: u64,
    pub variance_mode: TestVariance,
    pub z_convention: ZConvention,
    pub exposure_boundary: ExposureBoundary,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        self.exposure.validate()?;
        for s in &self.strategies {
            s.validate()?;
        }
        if self.n_users < 2 {
            return Err(Error::InvalidParameter("n_users must be at least 2".into()));
        }
        if let Assignment::Bernoulli { p } = self.assignment {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain("assignment probability p", "in (0, 1)", p));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain("alpha", "in (0, 1)", self.alpha));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter(
                "replications must be at least 1".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain("noise_sigma", ">= 0", self.noise_sigma));
        }
        if self.horizon_days == 0 {
            return Err(Error::InvalidParameter(
                "horizon_days must be at least 1".into(),
            ));
        }
        if !(self.exposure.cdf(self.horizon_days as f64) > 0.0) {
            return Err(Error::InvalidParameter(
                "exposure distribution puts no mass inside the horizon".into(),
            ));
        }
        if self.variance_mode == TestVariance::Known && !(self.noise_sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "known-variance tests need noise_sigma > 0".into(),
            ));
        }
        Ok(())
    }

    /// Expected treated and control counts once everyone is exposed.
    pub fn group_sizes(&self) -> (u64, u64) {
        match self.assignment {
            Assignment::ExactSplit => {
                let treated = (self.n_users / 2) as u64;
                (treated, self.n_users as u64 - treated)
            }
            Assignment::Bernoulli { p } => {
                let treated = libm::round(self.n_users as f64 * p) as u64;
                (treated.max(1), (self.n_users as u64 - treated).max(1))
            }
        }
    }

    /// The analytic counterpart: same curve and exposure, noise variance
    /// growing at `noise_sigma²` per day.
    pub fn analytic_model(&self) -> AnalyticScenario {
        let (n1, n0) = self.group_sizes();
        AnalyticScenario {
            curve: self.curve.clone(),
            dist: self.exposure.clone(),
            variance: VarianceModel::LinearGrowth {
                sigma2: self.noise_sigma * self.noise_sigma,
            },
            n1,
            n0,
            z_convention: self.z_convention,
        }
    }

    pub fn critical_value(&self) -> f64 {
        match self.sidedness {
            Sidedness::One => normal_quantile(1.0 - self.alpha),
            Sidedness::Two => normal_quantile(1.0 - 0.5 * self.alpha),
        }
    }

    fn rejects(&self, z: f64, critical: f64) -> bool {
        match self.sidedness {
            Sidedness::One => z > critical,
            Sidedness::Two => z.abs() > critical,
        }
    }
}

/// Random stream for replication `replication` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Draws one experiment.
///
/// Exposure times beyond the horizon are redrawn, so every user is exposed
/// within `[0, T]`. Day `d` of an exposed user carries
/// `N(0, σ²·ℓ) + w·[Δ(d+1−e) − Δ(max(d, e)−e)]`, where `ℓ` is the length of
/// the part of the day after exposure.
pub fn simulate_panel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<UserPanel> {
    scenario.validate()?;
    Ok(draw_panel(scenario, scenario.n_users, rng))
}

fn draw_panel<R: Rng + ?Sized>(scenario: &Scenario, n_users: usize, rng: &mut R) -> UserPanel {
    let days = scenario.horizon_days as usize;
    let horizon = scenario.horizon_days as f64;
    let half = n_users / 2;
    let mut ids = Vec::with_capacity(n_users);
    let mut treated = Vec::with_capacity(n_users);
    let mut exposure = Vec::with_capacity(n_users);
    let mut increments = vec![0.0; n_users * days];
    for i in 0..n_users {
        let w = match scenario.assignment {
            Assignment::ExactSplit => i < half,
            Assignment::Bernoulli { p } => rng.random::<f64>() < p,
        };
        let e = loop {
            let e = scenario.exposure.sample_one(rng);
            if e <= horizon {
                break e;
            }
        };
        let row = &mut increments[i * days..(i + 1) * days];
        let first_day = libm::floor(e) as usize;
        for (d, slot) in row.iter_mut().enumerate().skip(first_day) {
            let start = (d as f64).max(e);
            let end = d as f64 + 1.0;
            if start >= end {
                continue;
            }
            let z: f64 = rng.sample(StandardNormal);
            let mut value = scenario.noise_sigma * libm::sqrt(end - start) * z;
            if w {
                value += scenario.curve.cum(end - e) - scenario.curve.cum(start - e);
            }
            *slot = value;
        }
        ids.push(i as u64);
        treated.push(w);
        exposure.push(e);
    }
    UserPanel::from_columns(scenario.horizon_days, ids, treated, exposure, increments)
        .expect("simulated panel is valid by construction")
}

/// Rejection statistics for one strategy on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub strategy: MeasurementStrategy,
    pub day: u32,
    pub rejections: usize,
    /// Replications in which the test could be computed.
    pub defined_replications: usize,
    /// Mean Z across defined replications; 0 when there are none.
    pub mean_z: f64,
    /// Sample standard deviation of Z across defined replications.
    pub z_sd: f64,
}

impl PowerPoint {
    pub fn defined(&self) -> bool {
        self.defined_replications > 0
    }

    pub fn rejection_rate(&self) -> Option<f64> {
        self.defined()
            .then(|| self.rejections as f64 / self.defined_replications as f64)
    }

    /// Binomial Monte Carlo standard error `√(r(1−r)/R)`.
    pub fn se(&self) -> Option<f64> {
        self.rejection_rate()
            .map(|r| libm::sqrt(r * (1.0 - r) / self.defined_replications as f64))
    }

    /// Standard error of `mean_z`.
    pub fn mean_z_se(&self) -> Option<f64> {
        self.defined()
            .then(|| self.z_sd / libm::sqrt(self.defined_replications as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurveResult {
    pub replications: usize,
    pub alpha: f64,
    /// Strategy-major, days `1..=T` within each strategy.
    pub points: Vec<PowerPoint>,
}

impl PowerCurveResult {
    pub fn series(&self, strategy: MeasurementStrategy) -> impl Iterator<Item = &PowerPoint> + '_ {
        self.points.iter().filter(move |p| p.strategy == strategy)
    }

    pub fn point(&self, strategy: MeasurementStrategy, day: u32) -> Option<&PowerPoint> {
        self.points
            .iter()
            .find(|p| p.strategy == strategy && p.day == day)
    }
}

// Per replication, per (strategy, day): Z when the test was computable.
type ReplicationOutcome = Vec<Option<f64>>;

/// Rejection rates of every strategy on days `1..=T`.
///
/// Days on which a replication lacks the users to form the test (an empty
/// group, fewer than two users with estimated variance, or all-equal
/// measurements) are left out of that day's rate; a day with no computable
/// replication is reported as undefined.
pub fn power_curve(scenario: &Scenario) -> Result<PowerCurveResult> {
    scenario.validate()?;
    let days = scenario.horizon_days;
    let model = scenario.analytic_model();
    let known_outcome: Vec<Option<f64>> = match scenario.variance_mode {
        TestVariance::Estimated => Vec::new(),
        TestVariance::Known => {
            let mut table = Vec::with_capacity(scenario.strategies.len() * days as usize);
            for &strategy in &scenario.strategies {
                for day in 1..=days {
                    table.push(absent_on_missing(
                        model.mixture_variance_for(strategy, day as f64),
                    )?);
                }
            }
            table
        }
    };

    let run = |replication: usize| -> Result<ReplicationOutcome> {
        let mut rng = replication_rng(scenario.seed, replication as u64);
        let panel = draw_panel(scenario, scenario.n_users, &mut rng);
        let mut out = Vec::with_capacity(scenario.strategies.len() * days as usize);
        for (si, &strategy) in scenario.strategies.iter().enumerate() {
            for day in 1..=days {
                let variance = match scenario.variance_mode {
                    TestVariance::Estimated => VarianceMode::Estimated,
                    TestVariance::Known => {
                        match known_outcome[si * days as usize + day as usize - 1] {
                            Some(v) => VarianceMode::KnownOutcome(v),
                            None => {
                                out.push(None);
                                continue;
                            }
                        }
                    }
                };
                let options = ZOptions {
                    variance,
                    convention: scenario.z_convention,
                    boundary: scenario.exposure_boundary,
                };
                let z = absent_on_missing(panel.z_statistic(strategy, day as f64, &options))?;
                out.push(z.map(|s| s.z));
            }
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<ReplicationOutcome> = {
        use rayon::prelude::*;
        (0..scenario.replications)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<ReplicationOutcome> =
        (0..scenario.replications).map(run).collect::<Result<_>>()?;

    let critical = scenario.critical_value();
    let mut points = Vec::with_capacity(scenario.strategies.len() * days as usize);
    for (si, &strategy) in scenario.strategies.iter().enumerate() {
        for day in 1..=days {
            let slot = si * days as usize + day as usize - 1;
            let (mut defined, mut rejections) = (0usize, 0usize);
            let (mut mean, mut m2) = (0.0, 0.0);
            for z in outcomes.iter().filter_map(|o| o[slot]) {
                defined += 1;
                if scenario.rejects(z, critical) {
                    rejections += 1;
                }
                let delta = z - mean;
                mean += delta / defined as f64;
                m2 += delta * (z - mean);
            }
            let z_sd = if defined > 1 {
                libm::sqrt(m2 / (defined as f64 - 1.0))
            } else {
                0.0
            };
            points.push(PowerPoint {
                strategy,
                day,
                rejections,
                defined_replications: defined,
                mean_z: if defined > 0 { mean } else { 0.0 },
                z_sd,
            });
        }
    }
    Ok(PowerCurveResult {
        replications: scenario.replications,
        alpha: scenario.alpha,
        points,
    })
}

fn absent_on_missing<T>(result: Result<T>) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(
            Error::InsufficientData { .. }
            | Error::DegenerateVariance
            | Error::UndefinedConditional { .. },
        ) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimand {
    pub mean_diff: f64,
    pub se: f64,
    pub n1: usize,
    pub n0: usize,
}

/// Difference in group means on one large simulated panel, with its
/// standard error from the group sample variances.
pub fn monte_carlo_estimand(
    scenario: &Scenario,
    strategy: MeasurementStrategy,
    t: f64,
    n_users_override: Option<usize>,
) -> Result<MonteCarloEstimand> {
    scenario.validate()?;
    let n_users = n_users_override.unwrap_or(scenario.n_users);
    let mut rng = replication_rng(scenario.seed, u64::MAX);
    let panel = draw_panel(scenario, n_users, &mut rng);
    let options = ZOptions {
        variance: VarianceMode::Estimated,
        convention: ZConvention::DivideByStandardDeviation,
        boundary: scenario.exposure_boundary,
    };
    let z = panel.z_statistic(strategy, t, &options)?;
    Ok(MonteCarloEstimand {
        mean_diff: z.diff,
        se: libm::sqrt(z.variance),
        n1: z.n1,
        n0: z.n0,
    })
}

fn three_strategies() -> Vec<MeasurementStrategy> {
    vec![
        MeasurementStrategy::Cumulative,
        MeasurementStrategy::CumulativeWindowed { nu: 7.0 },
        MeasurementStrategy::Windowed { nu: 7.0 },
    ]
}

/// Exponentially timed exposure with a quickly fading effect.
pub fn builtin_dgp1() -> Scenario {
    Scenario {
        n_users: 700,
        assignment: Assignment::ExactSplit,
        exposure: ExposureDistribution::Exponential { lambda: 0.4 },
        curve: EffectCurve::ExponentialDecay { a: 1.0, b: 1.0 },
        noise_sigma: 1.0,
        horizon_days: 21,
        strategies: three_strategies(),
        alpha: 0.10,
        sidedness: Sidedness::Two,
        replications: DEFAULT_REPLICATIONS,
        seed: DEFAULT_SEED,
        variance_mode: TestVariance::Estimated,
        z_convention: ZConvention::DivideByStandardDeviation,
        exposure_boundary: ExposureBoundary::Strict,
    }
}

/// Accelerating exposure (density ∝ t³) with an effect peaking about six
/// days after exposure.
pub fn builtin_dgp2() -> Scenario {
    Scenario {
        exposure: ExposureDistribution::PowerLawDensity {
            k: 3.0,
            horizon: 21.0,
        },
        curve: EffectCurve::GammaPdfShape {
            shape: 84.0,
            rate: 14.0,
            scale: 1.0,
        },
        ..builtin_dgp1()
    }
}

/// Two exposure batches (days 0 and 7) with a constant effect during each
/// user's first week, tested with the known variance divided out.
pub fn builtin_example2() -> Scenario {
    Scenario {
        n_users: 1_000,
        assignment: Assignment::ExactSplit,
        exposure: ExposureDistribution::TwoPoint {
            times: [0.0, 7.0],
            probs: [0.5, 0.5],
        },
        curve: EffectCurve::StepConstant {
            c: 0.05,
            t_end: 7.0,
        },
        noise_sigma: core::f64::consts::SQRT_2,
        horizon_days: 21,
        strategies: vec![MeasurementStrategy::Cumulative],
        alpha: 0.10,
        sidedness: Sidedness::One,
        replications: 5_000,
        seed: DEFAULT_SEED,
        variance_mode: TestVariance::Known,
        z_convention: ZConvention::DivideByVariance,
        exposure_boundary: ExposureBoundary::Inclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut s: Scenario) -> Scenario {
        s.replications = 50;
        s
    }

    #[test]
    fn exact_split_halves_the_population() {
        let s = builtin_dgp1();
        let panel = simulate_panel(&s, &mut replication_rng(1, 0)).unwrap();
        let treated = panel.users().filter(|u| u.treated).count();
        assert_eq!((treated, panel.len() - treated), (350, 350));
        assert!(panel.users().all(|u| (0.0..=21.0).contains(&u.exposure)));
    }

    #[test]
    fn pre_exposure_days_are_empty() {
        let s = builtin_dgp2();
        let panel = simulate_panel(&s, &mut replication_rng(3, 0)).unwrap();
        for u in panel.users() {
            let first = libm::floor(u.exposure) as usize;
            assert!(u.increments[..first.min(21)].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn builtin_parameters() {
        let d1 = builtin_dgp1();
        assert!((d1.exposure.cdf(7.0) - 0.93919).abs() < 1e-5);
        let d2 = builtin_dgp2();
        assert!((d2.curve.peak_time().unwrap() - 83.0 / 14.0).abs() < 1e-12);
        let ex = builtin_example2();
        let tau = crate::estimands::tau_cumulative(&ex.curve, &ex.exposure, 10.0).unwrap();
        assert!((tau - 0.25).abs() < 1e-15);
        for s in [d1, d2, ex] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn power_curve_is_deterministic() {
        let s = small(builtin_dgp1());
        let a = power_curve(&s).unwrap();
        let b = power_curve(&s).unwrap();
        assert_eq!(a, b);
        let other = power_curve(&Scenario { seed: 7, ..s }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn windowed_days_before_first_window_are_undefined() {
        let s = small(builtin_dgp1());
        let result = power_curve(&s).unwrap();
        let win = MeasurementStrategy::Windowed { nu: 7.0 };
        for day in 1..=7 {
            assert!(!result.point(win, day).unwrap().defined());
        }
        assert!(result.point(win, 8).unwrap().defined());
    }

    #[test]
    fn capped_and_uncapped_agree_before_window_closes() {
        let s = small(builtin_dgp1());
        let result = power_curve(&s).unwrap();
        let cwin = MeasurementStrategy::CumulativeWindowed { nu: 7.0 };
        for day in 1..=7 {
            let a = result.point(MeasurementStrategy::Cumulative, day).unwrap();
            let b = result.point(cwin, day).unwrap();
            assert_eq!(a.mean_z, b.mean_z);
            assert_eq!(a.rejections, b.rejections);
        }
    }

    #[test]
    fn validation_errors() {
        let mut s = builtin_dgp1();
        s.alpha = 1.0;
        assert!(s.validate().is_err());
        let mut s = builtin_dgp1();
        s.assignment = Assignment::Bernoulli { p: 0.0 };
        assert!(s.validate().is_err());
        let mut s = builtin_dgp1();
        s.replications = 0;
        assert!(s.validate().is_err());
        let mut s = builtin_dgp1();
        s.exposure = ExposureDistribution::TwoPoint {
            times: [30.0, 40.0],
            probs: [0.5, 0.5],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn critical_values() {
        let mut s = builtin_dgp1();
        assert!((s.critical_value() - 1.6448536269514722).abs() < 1e-12);
        s.sidedness = Sidedness::One;
        assert!((s.critical_value() - 1.2815515655446004).abs() < 1e-12);
    }
}
