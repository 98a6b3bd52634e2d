//! Treatment-effect curves indexed by time since exposure.
//!
//! Every curve exposes the incremental effect `δ(t)` (an effect rate) and the
//! cumulative effect `Δ(t) = ∫₀ᵗ δ(s) ds`. Times are continuous, in days.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::regularized_gamma_p;

#[derive(Debug, Clone, PartialEq)]
pub enum EffectCurve {
    /// `δ(t) = a·exp(-b·t)`.
    ExponentialDecay {
        a: f64,
        b: f64,
    },
    /// `δ(t) = a·t·exp(-b·t)`.
    LinearTimesExp {
        a: f64,
        b: f64,
    },
    /// `δ(t) = scale · rateˢʰᵃᵖᵉ / Γ(shape) · tˢʰᵃᵖᵉ⁻¹ · exp(-rate·t)`.
    GammaPdfShape {
        shape: f64,
        rate: f64,
        scale: f64,
    },
    /// `δ(t) = c` on `(0, t_end)`, zero elsewhere.
    StepConstant {
        c: f64,
        t_end: f64,
    },
    Tabulated(TabulatedCurve),
    Zero,
}

/// Piecewise-linear incremental effect on a strictly increasing grid, zero
/// outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    // Trapezoid integral of `values` from grid[0] to grid[i].
    running: Vec<f64>,
}

impl TabulatedCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "tabulated curve needs equal, non-empty grid and values (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated curve contains non-finite entries".into(),
            ));
        }
        if grid[0] < 0.0 {
            return Err(Error::domain("tabulated grid time", ">= 0", grid[0]));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        let mut running = Vec::with_capacity(grid.len());
        running.push(0.0);
        for i in 1..grid.len() {
            let area = 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
            running.push(running[i - 1] + area);
        }
        Ok(TabulatedCurve {
            grid,
            values,
            running,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    // Index i with grid[i] <= t < grid[i + 1]; caller guarantees t inside the grid.
    fn segment(&self, t: f64) -> usize {
        (self.grid.partition_point(|&g| g <= t).max(1) - 1).min(self.grid.len().saturating_sub(2))
    }

    fn interpolate(&self, t: f64) -> f64 {
        let n = self.grid.len();
        if t < self.grid[0] || t > self.grid[n - 1] {
            return 0.0;
        }
        if n == 1 {
            return self.values[0];
        }
        let i = self.segment(t);
        let (g0, g1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - g0) / (g1 - g0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    fn integral(&self, t: f64) -> f64 {
        let n = self.grid.len();
        if t <= self.grid[0] || n == 1 {
            return 0.0;
        }
        if t >= self.grid[n - 1] {
            return self.running[n - 1];
        }
        let i = self.segment(t);
        self.running[i] + 0.5 * (self.values[i] + self.interpolate(t)) * (t - self.grid[i])
    }
}

impl EffectCurve {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, "a finite value", v))
            }
        };
        match *self {
            EffectCurve::ExponentialDecay { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                if b < 0.0 {
                    return Err(Error::domain("decay rate b", ">= 0", b));
                }
            }
            EffectCurve::LinearTimesExp { a, b } => {
                finite("a", a)?;
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::domain("decay rate b", "> 0", b));
                }
            }
            EffectCurve::GammaPdfShape { shape, rate, scale } => {
                finite("scale", scale)?;
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err(Error::domain("shape", "> 0", shape));
                }
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::domain("rate", "> 0", rate));
                }
            }
            EffectCurve::StepConstant { c, t_end } => {
                finite("c", c)?;
                if !(t_end > 0.0 && t_end.is_finite()) {
                    return Err(Error::domain("t_end", "> 0", t_end));
                }
            }
            EffectCurve::Tabulated(_) | EffectCurve::Zero => {}
        }
        Ok(())
    }

    /// Incremental effect `δ(t)`.
    pub fn incremental(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.delta(t))
    }

    /// Cumulative effect `Δ(t)`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cum(t))
    }

    /// `δ` without the domain check; zero for negative arguments.
    pub(crate) fn delta(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            EffectCurve::ExponentialDecay { a, b } => a * libm::exp(-b * t),
            EffectCurve::LinearTimesExp { a, b } => a * t * libm::exp(-b * t),
            EffectCurve::GammaPdfShape { shape, rate, scale } => {
                if t == 0.0 {
                    return if shape == 1.0 {
                        scale * rate
                    } else if shape > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                }
                let log_density = shape * libm::log(rate) - libm::lgamma(shape)
                    + (shape - 1.0) * libm::log(t)
                    - rate * t;
                scale * libm::exp(log_density)
            }
            EffectCurve::StepConstant { c, t_end } => {
                if t > 0.0 && t < t_end {
                    c
                } else {
                    0.0
                }
            }
            EffectCurve::Tabulated(ref tab) => tab.interpolate(t),
            EffectCurve::Zero => 0.0,
        }
    }

    /// `Δ` without the domain check; zero for non-positive arguments.
    pub(crate) fn cum(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            EffectCurve::ExponentialDecay { a, b } => {
                if b == 0.0 {
                    a * t
                } else {
                    -a * libm::expm1(-b * t) / b
                }
            }
            EffectCurve::LinearTimesExp { a, b } => {
                // a/b² · (1 - e^{-bt}(1 + bt))
                let bt = b * t;
                a / (b * b) * (-libm::expm1(-bt) - bt * libm::exp(-bt))
            }
            EffectCurve::GammaPdfShape { shape, rate, scale } => {
                scale * regularized_gamma_p(shape, rate * t)
            }
            EffectCurve::StepConstant { c, t_end } => c * t.min(t_end),
            EffectCurve::Tabulated(ref tab) => tab.integral(t),
            EffectCurve::Zero => 0.0,
        }
    }

    /// Arguments at which `Δ` may fail to be smooth. Quadrature splits there.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        match *self {
            EffectCurve::StepConstant { t_end, .. } => alloc::vec![t_end],
            EffectCurve::Tabulated(ref tab) => tab.grid.clone(),
            _ => Vec::new(),
        }
    }

    /// Points `e` where `e ↦ Δ(s − e)` may have a kink.
    pub(crate) fn kinks_before(&self, s: f64) -> Vec<f64> {
        self.kinks().into_iter().map(|k| s - k).collect()
    }

    /// True when `δ(t) >= 0` for every `t`.
    pub fn is_non_negative(&self) -> bool {
        match *self {
            EffectCurve::ExponentialDecay { a, .. } | EffectCurve::LinearTimesExp { a, .. } => {
                a >= 0.0
            }
            EffectCurve::GammaPdfShape { scale, .. } => scale >= 0.0,
            EffectCurve::StepConstant { c, .. } => c >= 0.0,
            EffectCurve::Tabulated(ref tab) => tab.values.iter().all(|&v| v >= 0.0),
            EffectCurve::Zero => true,
        }
    }

    /// Time of the largest incremental effect, when the variant has one in closed form.
    pub fn peak_time(&self) -> Option<f64> {
        match *self {
            EffectCurve::ExponentialDecay { .. } => Some(0.0),
            EffectCurve::LinearTimesExp { b, .. } => Some(1.0 / b),
            EffectCurve::GammaPdfShape { shape, rate, .. } => Some(((shape - 1.0) / rate).max(0.0)),
            _ => None,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("time since exposure", ">= 0", t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn riemann(curve: &EffectCurve, t: f64, step: f64) -> f64 {
        let n = libm::round(t / step) as usize;
        let h = t / n as f64;
        (0..n)
            .map(|i| curve.delta((i as f64 + 0.5) * h))
            .sum::<f64>()
            * h
    }

    fn sample_curves() -> Vec<EffectCurve> {
        vec![
            EffectCurve::ExponentialDecay { a: 0.1, b: 0.1 },
            EffectCurve::ExponentialDecay { a: 1.0, b: 1.0 },
            EffectCurve::ExponentialDecay { a: 0.3, b: 0.0 },
            EffectCurve::LinearTimesExp { a: 0.04, b: 0.2 },
            EffectCurve::GammaPdfShape {
                shape: 84.0,
                rate: 14.0,
                scale: 1.0,
            },
            EffectCurve::GammaPdfShape {
                shape: 2.5,
                rate: 0.7,
                scale: 0.4,
            },
            EffectCurve::StepConstant {
                c: 0.05,
                t_end: 7.0,
            },
            EffectCurve::Tabulated(
                TabulatedCurve::new(vec![0.0, 2.0, 5.0, 9.0], vec![0.0, 0.4, 0.1, 0.0]).unwrap(),
            ),
            EffectCurve::Zero,
        ]
    }

    #[test]
    fn incremental_examples() {
        let fast = EffectCurve::ExponentialDecay { a: 0.1, b: 0.1 };
        assert_eq!(fast.incremental(0.0).unwrap(), 0.1);
        assert_eq!(EffectCurve::Zero.incremental(5.0).unwrap(), 0.0);
        let step = EffectCurve::StepConstant {
            c: 0.05,
            t_end: 7.0,
        };
        assert_eq!(step.incremental(8.0).unwrap(), 0.0);
        assert_eq!(step.incremental(3.0).unwrap(), 0.05);
    }

    #[test]
    fn negative_time_is_a_domain_error() {
        for curve in sample_curves() {
            assert!(matches!(curve.incremental(-0.5), Err(Error::Domain { .. })));
            assert!(matches!(curve.cumulative(-1e-9), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn cumulative_examples() {
        let c = 0.05;
        let step = EffectCurve::StepConstant { c, t_end: 7.0 };
        assert!((step.cumulative(3.0).unwrap() - 3.0 * c).abs() < 1e-15);
        assert!((step.cumulative(7.0).unwrap() - 7.0 * c).abs() < 1e-15);
        assert_eq!(
            step.cumulative(30.0).unwrap(),
            step.cumulative(7.0).unwrap()
        );

        let fast = EffectCurve::ExponentialDecay { a: 0.1, b: 0.1 };
        let exact = 1.0 - libm::exp(-0.7);
        let value = fast.cumulative(7.0).unwrap();
        assert!((value - exact).abs() < 1e-15);
        assert!((value - 0.50341).abs() < 1e-5);
        assert!((riemann(&fast, 7.0, 1e-4) - value).abs() < 1e-9);

        assert_eq!(EffectCurve::Zero.cumulative(12.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_at_origin() {
        for curve in sample_curves() {
            assert_eq!(curve.cumulative(0.0).unwrap(), 0.0, "{curve:?}");
        }
    }

    #[test]
    fn cumulative_matches_riemann_sum() {
        for curve in sample_curves() {
            for &t in &[0.5, 1.0, 3.0, 5.9, 7.0, 10.0, 14.0, 21.0] {
                let delta = curve.cumulative(t).unwrap();
                let approx = riemann(&curve, t, 1e-4);
                assert!(
                    (delta - approx).abs() <= 1e-6 * (1.0 + delta.abs()),
                    "{curve:?} t={t}: {delta} vs {approx}"
                );
            }
        }
    }

    #[test]
    fn cumulative_is_continuous() {
        for curve in sample_curves() {
            for i in 0..200 {
                let t = i as f64 * 0.11;
                let gap = (curve.cum(t + 1e-9) - curve.cum(t)).abs();
                assert!(gap < 1e-7, "{curve:?} at {t}");
            }
        }
    }

    #[test]
    fn gamma_peak_location() {
        let curve = EffectCurve::GammaPdfShape {
            shape: 84.0,
            rate: 14.0,
            scale: 1.0,
        };
        let peak = curve.peak_time().unwrap();
        assert!((peak - 83.0 / 14.0).abs() < 1e-15);
        let at_peak = curve.delta(peak);
        assert!(curve.delta(peak - 0.05) < at_peak && curve.delta(peak + 0.05) < at_peak);
        // Effectively all of the effect has been delivered after three weeks.
        assert!((curve.cum(21.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_interpolation_and_bounds() {
        let tab = TabulatedCurve::new(vec![1.0, 3.0], vec![2.0, 4.0]).unwrap();
        let curve = EffectCurve::Tabulated(tab);
        assert_eq!(curve.incremental(0.5).unwrap(), 0.0);
        assert_eq!(curve.incremental(2.0).unwrap(), 3.0);
        assert_eq!(curve.incremental(3.5).unwrap(), 0.0);
        assert_eq!(curve.cumulative(1.0).unwrap(), 0.0);
        assert!((curve.cumulative(2.0).unwrap() - 2.5).abs() < 1e-15);
        assert!((curve.cumulative(10.0).unwrap() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_rejects_bad_grids() {
        assert!(TabulatedCurve::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(TabulatedCurve::new(vec![-1.0, 1.0], vec![0.0; 2]).is_err());
        assert!(TabulatedCurve::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(TabulatedCurve::new(vec![], vec![]).is_err());
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        assert!(EffectCurve::ExponentialDecay { a: 1.0, b: -0.1 }
            .validate()
            .is_err());
        assert!(EffectCurve::LinearTimesExp { a: 1.0, b: 0.0 }
            .validate()
            .is_err());
        assert!(EffectCurve::StepConstant { c: 1.0, t_end: 0.0 }
            .validate()
            .is_err());
        assert!(EffectCurve::GammaPdfShape {
            shape: 0.0,
            rate: 1.0,
            scale: 1.0
        }
        .validate()
        .is_err());
        for curve in sample_curves() {
            curve.validate().unwrap();
        }
    }
}
