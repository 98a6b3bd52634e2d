//! Special functions needed by the effect curves and the normal-theory tests.

use core::f64::consts::SQRT_2;

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Uses the power series below `x < a + 1` and a Lentz continued fraction
/// for the upper tail otherwise. Stable for large shapes since every term is
/// formed relative to `exp(a ln x - x - lnΓ(a))`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefactor = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..GAMMA_MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (sum * libm::exp(log_prefactor)).min(1.0)
    } else {
        1.0 - upper_fraction(a, x, log_prefactor)
    }
}

// Q(a, x) by modified Lentz.
fn upper_fraction(a: f64, x: f64, log_prefactor: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (libm::exp(log_prefactor) * h).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile, `p` in `(0, 1)`.
///
/// Bisection on [`normal_cdf`] to full double precision; only used to turn a
/// test level into a critical value, so speed is irrelevant.
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_p_shape_one_is_exponential_cdf() {
        for &x in &[0.1, 1.0, 2.5, 10.0, 40.0] {
            let expected = 1.0 - libm::exp(-x);
            assert!((regularized_gamma_p(1.0, x) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_p_integer_shape_matches_poisson_tail() {
        // P(n, x) = 1 - sum_{k<n} e^-x x^k / k!
        let x: f64 = 7.5;
        let n = 5;
        let mut term = libm::exp(-x);
        let mut tail = 0.0;
        for k in 0..n {
            if k > 0 {
                term *= x / k as f64;
            }
            tail += term;
        }
        assert!((regularized_gamma_p(n as f64, x) - (1.0 - tail)).abs() < 1e-13);
    }

    #[test]
    fn gamma_p_large_shape_is_finite_and_centered() {
        // Gamma(84, rate 14) has mean 6: P(84, 84) is a little above one half.
        let p = regularized_gamma_p(84.0, 84.0);
        assert!(p > 0.5 && p < 0.53, "{p}");
        assert_eq!(regularized_gamma_p(84.0, 0.0), 0.0);
        assert!((regularized_gamma_p(84.0, 1e4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_and_quantile() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_quantile(0.9) - 1.2815515655446004).abs() < 1e-12);
        assert!((normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-12);
        assert!((normal_quantile(0.025) + 1.959963984540054).abs() < 1e-12);
    }
}
