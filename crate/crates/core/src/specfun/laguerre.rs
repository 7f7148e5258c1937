//! `L_{1/2}(x)` for `x ≤ 0`, through exponentially scaled modified Bessel
//! functions of half the argument:
//!
//! ```text
//! L_{1/2}(x) = e^{x/2} [ (1 - x) I₀(-x/2) - x I₁(-x/2) ]
//! ```

use crate::error::{Error, Result};

pub fn laguerre_half(x: f64) -> Result<f64> {
    if !x.is_finite() || x > 0.0 {
        return Err(Error::domain("laguerre_half", format!("x = {x} must be finite and <= 0")));
    }
    let t = -0.5 * x;
    let (i0, i1) = (scaled_bessel_i(0, t), scaled_bessel_i(1, t));
    Ok((1.0 - x) * i0 - x * i1)
}

/// `e^{-t} I_ν(t)` for `ν ∈ {0, 1}` and `t ≥ 0`.
fn scaled_bessel_i(nu: u32, t: f64) -> f64 {
    if t <= 20.0 {
        // power series, all terms positive
        let q = 0.25 * t * t;
        let mut term = if nu == 0 { 1.0 } else { 0.5 * t };
        let mut sum = term;
        let mut k = 1.0;
        loop {
            term *= q / (k * (k + nu as f64));
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-t).exp()
    } else {
        // Hankel expansion; the smallest term near k ~ 2t is below 1e-17.
        let mu = 4.0 * (nu * nu) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            let next = -term * (mu - odd * odd) / (kf * 8.0 * t);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * t).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn at_origin() {
        assert_eq!(laguerre_half(0.0).unwrap(), 1.0);
    }

    #[test]
    fn reference_values() {
        // mpmath hyp1f1(-1/2, 1, x), 50 digits
        let cases = [
            (-1.0, 1.446_491_344_083_171_8),
            (-0.5, 1.235_582_057_558_263_2),
            (-3.0, 2.126_852_598_479_410_4),
            (-10.0, 3.658_671_608_148_035_5),
        ];
        for (x, want) in cases {
            assert_relative_eq!(laguerre_half(x).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn branch_switch_is_seamless() {
        let below = laguerre_half(-39.999_999).unwrap();
        let above = laguerre_half(-40.000_001).unwrap();
        assert!((below - above).abs() < 1e-6);
        // large-K asymptote: L_{1/2}(-K) ~ 2 sqrt(K/π)
        let k = 4000.0;
        assert_relative_eq!(laguerre_half(-k).unwrap(), 2.0 * (k / std::f64::consts::PI).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn strictly_increasing_in_k() {
        let mut prev = laguerre_half(0.0).unwrap();
        for i in 1..=400 {
            let v = laguerre_half(-(i as f64) * 0.25).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_positive() {
        assert!(laguerre_half(0.1).is_err());
        assert!(laguerre_half(f64::NAN).is_err());
    }
}
