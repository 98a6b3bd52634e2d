//! Distributions of the exposure time `E`.
//!
//! All conditional quantities use the right-continuous CDF, i.e. they
//! condition on `E <= t`. For the continuous variants this coincides with
//! `E < t`; for the discrete ones it means an atom at `t` counts as exposed.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, PartialEq)]
pub enum ExposureDistribution {
    Exponential {
        lambda: f64,
    },
    /// Two atoms at `times[0] < times[1]` with masses `probs`.
    TwoPoint {
        times: [f64; 2],
        probs: [f64; 2],
    },
    /// Density proportional to `t^k` on `[0, horizon]`.
    PowerLawDensity {
        k: f64,
        horizon: f64,
    },
    Empirical(EmpiricalExposure),
}

/// Equal-mass atoms at observed exposure times.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalExposure {
    times: Vec<f64>,
}

impl EmpiricalExposure {
    /// Sorts `times`; rejects empty input and negative or non-finite times.
    pub fn new(mut times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter(
                "empirical exposure needs at least one time".into(),
            ));
        }
        if let Some(&bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::domain(
                "empirical exposure time",
                ">= 0 and finite",
                bad,
            ));
        }
        times.sort_by(f64::total_cmp);
        Ok(EmpiricalExposure { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn count_at_or_below(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }
}

impl ExposureDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ExposureDistribution::Exponential { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::domain("lambda", "> 0", lambda));
                }
            }
            ExposureDistribution::TwoPoint { times, probs } => {
                if !(times[0] >= 0.0 && times[0] < times[1] && times[1].is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "two-point times must satisfy 0 <= t1 < t2, got {times:?}"
                    )));
                }
                if probs.iter().any(|&p| !(0.0..=1.0).contains(&p))
                    || (probs[0] + probs[1] - 1.0).abs() > 1e-12
                {
                    return Err(Error::InvalidParameter(format!(
                        "two-point probabilities must be in [0, 1] and sum to 1, got {probs:?}"
                    )));
                }
            }
            ExposureDistribution::PowerLawDensity { k, horizon } => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(Error::domain("power-law exponent k", ">= 0", k));
                }
                if !(horizon > 0.0 && horizon.is_finite()) {
                    return Err(Error::domain("power-law horizon", "> 0", horizon));
                }
            }
            ExposureDistribution::Empirical(_) => {}
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            ExposureDistribution::TwoPoint { .. } | ExposureDistribution::Empirical(_)
        )
    }

    /// Smallest `T` with `F_E(T) = 1`, if the support is bounded.
    pub fn support_upper(&self) -> Option<f64> {
        match self {
            ExposureDistribution::Exponential { .. } => None,
            ExposureDistribution::TwoPoint { times, probs } => {
                Some(if probs[1] > 0.0 { times[1] } else { times[0] })
            }
            ExposureDistribution::PowerLawDensity { horizon, .. } => Some(*horizon),
            ExposureDistribution::Empirical(emp) => emp.times.last().copied(),
        }
    }

    /// `F_E(e) = P(E <= e)`.
    pub fn cdf(&self, e: f64) -> f64 {
        if e < 0.0 {
            return 0.0;
        }
        match self {
            ExposureDistribution::Exponential { lambda } => -libm::expm1(-lambda * e),
            ExposureDistribution::TwoPoint { times, probs } => {
                let mut acc = 0.0;
                if e >= times[0] {
                    acc += probs[0];
                }
                if e >= times[1] {
                    acc += probs[1];
                }
                acc.min(1.0)
            }
            ExposureDistribution::PowerLawDensity { k, horizon } => {
                if e >= *horizon {
                    1.0
                } else {
                    libm::pow(e / horizon, k + 1.0)
                }
            }
            ExposureDistribution::Empirical(emp) => {
                emp.count_at_or_below(e) as f64 / emp.times.len() as f64
            }
        }
    }

    /// Density `f_E(e)` for the continuous variants; `None` for discrete ones.
    pub fn density(&self, e: f64) -> Option<f64> {
        match *self {
            ExposureDistribution::Exponential { lambda } => Some(if e < 0.0 {
                0.0
            } else {
                lambda * libm::exp(-lambda * e)
            }),
            ExposureDistribution::PowerLawDensity { k, horizon } => {
                Some(if e < 0.0 || e > horizon {
                    0.0
                } else {
                    (k + 1.0) * libm::pow(e, k) / libm::pow(horizon, k + 1.0)
                })
            }
            _ => None,
        }
    }

    /// Atoms `(time, mass)` of a discrete distribution, duplicates merged.
    /// Empty for continuous variants.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            ExposureDistribution::TwoPoint { times, probs } => times
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&t, &p)| (t, p))
                .collect(),
            ExposureDistribution::Empirical(emp) => {
                let mass = 1.0 / emp.times.len() as f64;
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                for &t in &emp.times {
                    match atoms.last_mut() {
                        Some((last, m)) if *last == t => *m += mass,
                        _ => atoms.push((t, mass)),
                    }
                }
                atoms
            }
            _ => Vec::new(),
        }
    }

    /// Inverse CDF, `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            ExposureDistribution::Exponential { lambda } => -libm::log1p(-u) / lambda,
            ExposureDistribution::TwoPoint { times, probs } => {
                if u < probs[0] {
                    times[0]
                } else {
                    times[1]
                }
            }
            ExposureDistribution::PowerLawDensity { k, horizon } => {
                horizon * libm::pow(u, 1.0 / (k + 1.0))
            }
            ExposureDistribution::Empirical(emp) => {
                let n = emp.times.len();
                let idx = ((u * n as f64) as usize).min(n - 1);
                emp.times[idx]
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `n` i.i.d. draws by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// `E(E | E <= t)`.
    pub fn conditional_mean_below(&self, t: f64) -> Result<f64> {
        let mass = self.cdf(t);
        if !(mass > 0.0) {
            return Err(Error::UndefinedConditional { t });
        }
        let mean = match self {
            ExposureDistribution::Exponential { lambda } => {
                // 1/λ - t e^{-λt} / (1 - e^{-λt})
                1.0 / lambda - t * libm::exp(-lambda * t) / mass
            }
            ExposureDistribution::PowerLawDensity { k, horizon } => {
                (k + 1.0) / (k + 2.0) * t.min(*horizon)
            }
            ExposureDistribution::TwoPoint { .. } | ExposureDistribution::Empirical(_) => {
                self.atoms()
                    .into_iter()
                    .take_while(|&(e, _)| e <= t)
                    .map(|(e, p)| e * p)
                    .sum::<f64>()
                    / mass
            }
        };
        Ok(mean.clamp(0.0, t))
    }

    /// Stieltjes integral `∫_{[0, t]} g(e) dF_E(e)`.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, t: f64) -> Result<f64> {
        self.integrate_range(g, f64::NEG_INFINITY, t)
    }

    /// Stieltjes integral over the half-open interval `(lower, upper]`.
    ///
    /// Atoms are summed with their masses; continuous variants integrate
    /// `g · f_E` over the part of the interval inside the support. A negative
    /// `lower` includes an atom at zero.
    pub fn integrate_range<G: Fn(f64) -> f64>(&self, g: G, lower: f64, upper: f64) -> Result<f64> {
        self.integrate_range_split(g, lower, upper, &[])
    }

    /// As [`integrate_range`](Self::integrate_range), with the quadrature
    /// split at `breaks` (points where `g` may have a kink or jump).
    pub(crate) fn integrate_range_split<G: Fn(f64) -> f64>(
        &self,
        g: G,
        lower: f64,
        upper: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        if self.is_discrete() {
            return Ok(self
                .atoms()
                .into_iter()
                .filter(|&(e, _)| e > lower && e <= upper)
                .map(|(e, p)| g(e) * p)
                .sum());
        }
        let lo = lower.max(0.0);
        let hi = match self.support_upper() {
            Some(end) => upper.min(end),
            None => upper,
        };
        if !(hi > lo) {
            return Ok(0.0);
        }
        let mut points: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect();
        points.push(lo);
        points.push(hi);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let integrand = |e: f64| {
            let w = self.density(e).unwrap_or(0.0);
            if w == 0.0 {
                0.0
            } else {
                g(e) * w
            }
        };
        let mut total = 0.0;
        for piece in points.windows(2) {
            total += quadrature::integrate(integrand, piece[0], piece[1])?;
        }
        Ok(total)
    }
}
