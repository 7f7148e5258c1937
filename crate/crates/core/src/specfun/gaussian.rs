//! Gaussian tail probability `Q(x) = P(Z > x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    gaussian_q(-x)
}

/// `ln Q(x)`, accurate far into the upper tail where `Q` underflows.
pub fn log_gaussian_q(x: f64) -> f64 {
    if x < 0.0 {
        (-gaussian_q(-x)).ln_1p()
    } else if x == f64::INFINITY {
        f64::NEG_INFINITY
    } else if x < 30.0 {
        gaussian_q(x).ln()
    } else {
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_ratio(x).ln()
    }
}

/// Mills ratio `Q(x) / φ(x)` for large positive `x`, via the Laplace
/// continued fraction evaluated with the modified Lentz method.
fn mills_ratio(x: f64) -> f64 {
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        assert_eq!(gaussian_q(0.0), 0.5);
        // mpmath erfc(10/sqrt(2))/2
        assert_relative_eq!(gaussian_q(10.0), 7.619_853_024_160_526e-24, max_relative = 1e-13);
    }

    #[test]
    fn complement_identity() {
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            assert!((gaussian_q(x) + gaussian_q(-x) - 1.0).abs() <= 1e-15, "x = {x}");
        }
    }

    #[test]
    fn strictly_decreasing() {
        let mut prev = gaussian_q(-5.0);
        for i in -499..=900 {
            let q = gaussian_q(i as f64 * 0.01);
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn log_q_is_continuous_across_branches() {
        // the erfc branch and the continued fraction agree where both are valid
        for x in [6.0, 10.0, 20.0, 29.0] {
            let direct = gaussian_q(x).ln();
            let cf = -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_ratio(x).ln();
            assert_relative_eq!(direct, cf, max_relative = 1e-13);
        }
        assert!(log_gaussian_q(40.0).is_finite());
        assert!(log_gaussian_q(40.0) < -800.0);
        assert_relative_eq!(log_gaussian_q(-3.0), (1.0 - gaussian_q(3.0)).ln(), max_relative = 1e-12);
    }
}
