//! The conditional bound `Φ(α₁, n, A)` by direct two-dimensional
//! quadrature. This is the reference every acceleration is checked against.
//!
//! ```text
//! Φ = Q(ρ) + C e^{-ρ²/2} ∫_{α₁}^{π/2} sin^{n-2}α ∫₀^∞ r^{n-1} e^{-r²/2 + ρ r cos α} dr dα
//! C = (n-1) / (2^{n/2} √π Γ((n+1)/2)),   ρ = A √(n·snr)
//! ```

use super::ConditionalBound;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_log, QuadOptions};
use crate::specfun::{lgamma, log_gaussian_q, SignedLogValue};
use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};

/// Relative accuracy requested from the inner and outer quadratures.
const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-10;

/// Peak of `r ↦ (n-1) ln r - r²/2 + c r`.
pub(crate) fn radial_peak(n: u32, c: f64) -> f64 {
    let m = n as f64 - 1.0;
    0.5 * c + (0.25 * c * c + m).sqrt()
}

/// `ln ∫₀^∞ r^{n-1} exp(-r²/2 + c r) dr`.
///
/// The log-integrand has second derivative `-(n-1)/r² - 1 ≤ -1`, so it lies
/// below `h(r*) - (r - r*)²/2` and the window `r* ± 14` carries everything
/// but `e^{-98}` of the mass.
pub fn log_radial_integral(n: u32, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("log_radial_integral", format!("n = {n} < 2")));
    }
    let m = n as f64 - 1.0;
    let peak = radial_peak(n, c);
    let top = m * peak.ln() - 0.5 * peak * peak + c * peak;
    // h(r* + d) - h(r*) with the stationarity c - r* = -m/r* folded in
    let shifted = |d: f64| {
        let x = d / peak;
        if x <= -1.0 {
            f64::NEG_INFINITY
        } else {
            m * (x.ln_1p() - x) - 0.5 * d * d
        }
    };
    let res = integrate(
        |d| shifted(d).exp(),
        (-14.0f64).max(-peak),
        14.0,
        &QuadOptions::rel(INNER_TOL).with_panels(4),
    )?;
    Ok(top + res.value.ln())
}

/// `ln C = ln((n-1) / (2^{n/2} √π Γ((n+1)/2)))`.
pub(crate) fn log_angular_constant(n: u32) -> f64 {
    let nf = n as f64;
    (nf - 1.0).ln() - 0.5 * nf * std::f64::consts::LN_2 - 0.5 * PI.ln() - lgamma(0.5 * (nf + 1.0))
}

fn check(alpha1: f64, n: u32, amp: f64, snr: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::domain("phi", format!("n = {n} < 2")));
    }
    if !(alpha1 > 0.0 && alpha1 <= PI) {
        return Err(Error::domain("phi", format!("alpha1 = {alpha1} outside (0, π]")));
    }
    if !(amp.is_finite() && amp >= 0.0) {
        return Err(Error::domain("phi", format!("amplitude A = {amp} must be finite and >= 0")));
    }
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::domain("phi", format!("snr = {snr} must be positive")));
    }
    Ok(())
}

pub(crate) fn check_args(alpha1: f64, n: u32, amp: f64, snr: f64) -> Result<()> {
    check(alpha1, n, amp, snr)
}

/// Signed `(lower, upper, sign)` such that `∫_{α₁}^{π/2} = sign ∫_lower^upper`.
pub(crate) fn angular_range(alpha1: f64) -> (f64, f64, f64) {
    if alpha1 <= FRAC_PI_2 {
        (alpha1, FRAC_PI_2, 1.0)
    } else {
        (FRAC_PI_2, alpha1, -1.0)
    }
}

/// Exact conditional bound by nested adaptive quadrature.
///
/// For `α₁ > π/2` (rates below `1/n`) the angular integral runs backwards
/// and the integral term is negative; the expression stays the probability
/// of leaving the cone.
pub fn phi_exact_2d(alpha1: f64, n: u32, amp: f64, snr: f64) -> Result<ConditionalBound> {
    check(alpha1, n, amp, snr)?;
    let rho = amp * (n as f64 * snr).sqrt();
    let log_q = log_gaussian_q(rho);
    let (lo, hi, sign) = angular_range(alpha1);
    if lo == hi {
        return Ok(ConditionalBound::from_parts(log_q, SignedLogValue::ZERO, None));
    }
    let failure = RefCell::new(None);
    let base = log_angular_constant(n) - 0.5 * rho * rho;
    let g = |alpha: f64| {
        let (s, c) = alpha.sin_cos();
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match log_radial_integral(n, rho * c) {
            Ok(li) => base + (n as f64 - 2.0) * s.ln() + li,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (log_int, _) = integrate_log(g, lo, hi, &QuadOptions::rel(OUTER_TOL).with_panels(4).with_scan(16))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let term = SignedLogValue::from_log(log_int) * SignedLogValue::from_f64(sign);
    Ok(ConditionalBound::from_parts(log_q, term, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spheregeom::solve_alpha1;
    use approx::assert_relative_eq;

    #[test]
    fn radial_integral_reference() {
        // mpmath quad at n = 32, c = √32 cos 1
        let v = log_radial_integral(32, 32f64.sqrt() * 1f64.cos()).unwrap();
        assert_relative_eq!(v, 57.978_739_363_547_48, max_relative = 1e-12);
        // c = 0: 2^{n/2-1} Γ(n/2)
        let v = log_radial_integral(10, 0.0).unwrap();
        assert_relative_eq!(v, 4.0 * std::f64::consts::LN_2 + lgamma(5.0), max_relative = 1e-12);
    }

    #[test]
    fn reference_values() {
        // P(ρ + Z₁ < Y cot α₁), Y ~ χ_{n-1}, by mpmath
        let cases = [
            (0.900_869_975_439_324_95, 16, 5.0, 0.042_151_275_322_571_468_8),
            (0.851_402_244_000_242_7, 32, 6.0, 0.161_365_923_828_600_93),
            (0.988_465_669_825_442_29, 8, 2.0, 0.384_731_047_028_092_625),
            (0.822_957_146_359_173_65, 64, 12.0, 5.422_253_562_385_073_25e-5),
        ];
        for (alpha1, n, rho, want) in cases {
            let snr = rho * rho / n as f64;
            let phi = phi_exact_2d(alpha1, n, 1.0, snr).unwrap();
            assert_relative_eq!(phi.value, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn equator_leaves_only_q() {
        let phi = phi_exact_2d(FRAC_PI_2, 16, 1.0, 1.0).unwrap();
        assert!(phi.integral_term.is_zero());
        assert_relative_eq!(phi.value, crate::specfun::gaussian_q(4.0), max_relative = 1e-15);
    }

    #[test]
    fn zero_amplitude_is_cap_mass() {
        // centred noise leaves the cone with probability 1 - cap ratio
        for n in [4, 9, 32] {
            let alpha1 = solve_alpha1(n, 0.5).unwrap().alpha1;
            let phi = phi_exact_2d(alpha1, n, 0.0, 1.0).unwrap();
            let ratio = 2f64.powf(-0.5 * n as f64);
            assert_relative_eq!(phi.value, 1.0 - ratio, max_relative = 1e-9);
        }
    }

    #[test]
    fn beyond_equator() {
        // n R < 1 puts α₁ past π/2; at A = 0 the answer is still 1 - 2^{-nR}
        let alpha1 = solve_alpha1(8, 0.05).unwrap().alpha1;
        assert!(alpha1 > FRAC_PI_2);
        let phi = phi_exact_2d(alpha1, 8, 0.0, 1.0).unwrap();
        assert!(!phi.integral_term.is_positive());
        assert_relative_eq!(phi.value, 1.0 - 2f64.powf(-0.4), max_relative = 1e-9);
    }

    #[test]
    fn decreasing_in_alpha_and_amplitude() {
        let n = 16;
        let mut prev = f64::INFINITY;
        for k in 1..=12 {
            let a = 0.4 + 0.09 * k as f64;
            let v = phi_exact_2d(a, n, 1.0, 1.0).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
        let alpha1 = solve_alpha1(n, 0.5).unwrap().alpha1;
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let v = phi_exact_2d(alpha1, n, 0.25 * k as f64, 1.0).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn tiny_values_stay_in_log_domain() {
        let alpha1 = solve_alpha1(128, 0.5).unwrap().alpha1;
        let phi = phi_exact_2d(alpha1, 128, 4.0, 10.0).unwrap();
        assert!(phi.log_value.is_finite() && phi.log_value < -700.0);
        assert!(phi.value >= 0.0);
    }
}
