//! Cap areas on the unit sphere in `n` dimensions and the cone angle whose
//! caps split the sphere into `M = 2^{nR}` equal parts.
//!
//! Everything is expressed through the normalised cap ratio
//! `Λ(α, n) / Λ(π, n)`, where `Λ(α, n)` is the surface area cut out by a
//! cone of half-angle `α` and `Λ(π, n) = n π^{n/2} / Γ(n/2 + 1)`.

use crate::error::{Error, Result};
use crate::specfun::lgamma;
use std::f64::consts::{FRAC_PI_2, LN_2, PI};

/// How the cap ratio is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CapRatioMethod {
    /// Two-step recurrence on `Π(α, n) = ∫₀^α sin^{n-2}θ dθ`.
    Recursion,
    /// The recurrence unrolled into a finite sum (even/odd `n`).
    ClosedForm,
    /// Regularised incomplete beta in log domain; stable for tiny caps.
    #[default]
    IncompleteBeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeAngle {
    pub alpha1: f64,
    pub n: u32,
    pub rate: f64,
    /// `log_cap_ratio(alpha1, n) + n R ln 2`.
    pub residual: f64,
}

fn check_n(func: &'static str, n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::domain(func, format!("n = {n} < 2")));
    }
    Ok(())
}

/// `ln Λ(π, n) = ln(n π^{n/2} / Γ((n+2)/2))`.
pub fn log_full_sphere_area(n: u32) -> Result<f64> {
    check_n("log_full_sphere_area", n)?;
    let nf = n as f64;
    Ok(nf.ln() + 0.5 * nf * PI.ln() - lgamma(0.5 * nf + 1.0))
}

/// `ln Λ(α, n)`.
pub fn log_cap_area(alpha: f64, n: u32, method: CapRatioMethod) -> Result<f64> {
    Ok(log_cap_ratio(alpha, n, method)? + log_full_sphere_area(n)?)
}

/// `ln(Λ(α, n) / Λ(π, n))`.
pub fn log_cap_ratio(alpha: f64, n: u32, method: CapRatioMethod) -> Result<f64> {
    check_n("log_cap_ratio", n)?;
    if !(alpha > 0.0 && alpha <= PI) {
        return Err(Error::domain("log_cap_ratio", format!("alpha = {alpha} outside (0, π]")));
    }
    if alpha == PI {
        return Ok(0.0);
    }
    match method {
        CapRatioMethod::IncompleteBeta => Ok(log_ratio_beta(alpha, n)),
        CapRatioMethod::Recursion => {
            let p = pi_recursion(alpha, n);
            linear_to_log_ratio(p, n, "log_cap_ratio(recursion)")
        }
        CapRatioMethod::ClosedForm => {
            let p = pi_closed_form(alpha, n)?;
            linear_to_log_ratio(p, n, "log_cap_ratio(closed_form)")
        }
    }
}

/// `ln` of the normaliser turning `Π(α, n)` into the cap ratio:
/// `(n-1) Γ(n/2 + 1) / (n √π Γ((n+1)/2))`.
fn log_pi_to_ratio(n: u32) -> f64 {
    let nf = n as f64;
    (nf - 1.0).ln() + lgamma(0.5 * nf + 1.0) - nf.ln() - 0.5 * PI.ln() - lgamma(0.5 * (nf + 1.0))
}

fn linear_to_log_ratio(p: f64, n: u32, func: &'static str) -> Result<f64> {
    if !(p > f64::MIN_POSITIVE) {
        return Err(Error::Underflow {
            func,
            detail: format!("Π evaluated to {p:e}"),
        });
    }
    Ok(p.ln() + log_pi_to_ratio(n))
}

/// Ratio through `Π(α, n) = ½ B(sin²α; (n-1)/2, ½)` for `α ≤ π/2`,
/// reflected about the equator otherwise.
fn log_ratio_beta(alpha: f64, n: u32) -> f64 {
    let a = 0.5 * (n as f64 - 1.0);
    let (s, c) = alpha.sin_cos();
    let log_i = log_beta_reg(a, 0.5, s * s, c * c);
    if alpha <= FRAC_PI_2 {
        log_i - LN_2
    } else {
        // 1 - I/2
        (-0.5 * log_i.exp()).ln_1p()
    }
}

/// `ln I_x(a, b)` given both `x` and `1 - x` (so callers can pass an
/// accurately computed complement).
pub(crate) fn log_beta_reg(a: f64, b: f64, x: f64, xc: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if xc <= 0.0 {
        return 0.0;
    }
    let log_front = a * x.ln() + b * xc.ln() - (lgamma(a) + lgamma(b) - lgamma(a + b));
    if x < (a + 1.0) / (a + b + 2.0) {
        log_front - a.ln() + beta_cf(a, b, x).ln()
    } else {
        let other = (log_front - b.ln() + beta_cf(b, a, xc).ln()).exp();
        (-other).ln_1p()
    }
}

/// Continued fraction for the incomplete beta, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `Π(α, n)` from the two-step recurrence
/// `Π(α, n) = -sin^{n-3}α cos α / (n-2) + (n-3)/(n-2) · Π(α, n-2)`
/// with `Π(α, 2) = α` and `Π(α, 3) = 1 - cos α`.
///
/// Running the recurrence upward loses about `2 ln(1/sin α)` digits per
/// step when the cap is small, so for `sin²α < 0.99` it is run downward
/// from a dimension where `Π` is negligible (Miller's method), which is
/// stable in that direction. Caps beyond the equator are reflected.
pub(crate) fn pi_recursion(alpha: f64, n: u32) -> f64 {
    if alpha > FRAC_PI_2 {
        return 2.0 * pi_recursion(FRAC_PI_2, n) - pi_recursion(PI - alpha, n);
    }
    let (s, c) = alpha.sin_cos();
    if s * s < 0.99 {
        pi_downward(s, c, n)
    } else {
        pi_upward(alpha, s, c, n)
    }
}

fn pi_upward(alpha: f64, s: f64, c: f64, n: u32) -> f64 {
    let (mut p, mut m) = if n % 2 == 0 { (alpha, 4) } else { (1.0 - c, 5) };
    if n <= 3 {
        return p;
    }
    while m <= n {
        let mf = m as f64;
        p = -s.powi(m as i32 - 3) * c / (mf - 2.0) + (mf - 3.0) / (mf - 2.0) * p;
        m += 2;
    }
    p
}

fn pi_downward(s: f64, c: f64, n: u32) -> f64 {
    if n == 2 {
        return s.atan2(c);
    }
    if n == 3 {
        // 1 - cos α without cancellation
        return s * s / (1.0 + c);
    }
    // Each downward step multiplies the solution by ~1/sin²α while the
    // error from the zero start only grows like sqrt(dimension ratio).
    let steps = (45.0 / -(s * s).ln()).ceil() as u32 + 2;
    let top = n + 2 * steps;
    let mut p = 0.0;
    let mut m = top;
    while m > n {
        let mf = m as f64;
        p = ((mf - 2.0) * p + s.powi(m as i32 - 3) * c) / (mf - 3.0);
        m -= 2;
    }
    p
}

/// `Π(α, n)` from the unrolled recurrence:
///
/// ```text
/// Π(α, n) = (n-3)!!/(n-2)!! · T(α) - Σ_{j=0}^{J} c_j sin^{n-3-2j}α cos α
/// ```
///
/// with `T = α` (even `n`) or `1 - cos α` (odd `n`), `c_0 = 1/(n-2)`,
/// `c_j = c_{j-1} (n-1-2j)/(n-2-2j)`, and `J = ⌊(n-4)/2⌋` so that the last
/// power of `sin α` is 1 (even) or 2 (odd).
pub(crate) fn pi_closed_form(alpha: f64, n: u32) -> Result<f64> {
    let (s, c) = alpha.sin_cos();
    let head = if n % 2 == 0 { alpha } else { 1.0 - c };
    if n <= 3 {
        return Ok(head);
    }
    let nf = n as f64;
    // (n-3)!!/(n-2)!! as a running product keeps the leading term to a few ulps
    let mut lead = head;
    let mut m = n as i64 - 2;
    while m >= 2 {
        lead *= (m - 1) as f64 / m as f64;
        m -= 2;
    }
    let last = (n as i64 - 4) / 2;
    let mut coef = 1.0 / (nf - 2.0);
    let mut sum = 0.0;
    let mut largest = lead.abs();
    for j in 0..=last {
        if j > 0 {
            let jf = j as f64;
            coef *= (nf - 1.0 - 2.0 * jf) / (nf - 2.0 - 2.0 * jf);
        }
        let t = coef * s.powi((n as i64 - 3 - 2 * j) as i32) * c;
        largest = largest.max(t.abs());
        sum += t;
    }
    let p = lead - sum;
    // Each term carries a rounding error of order ε·|term|, so the relative
    // error of the difference is about nε·largest/|p|.
    if p.abs() < 1e-4 * largest {
        return Err(Error::Underflow {
            func: "log_cap_ratio(closed_form)",
            detail: format!("alternating sum cancels: result {p:e} against terms of size {largest:e}"),
        });
    }
    Ok(p)
}

/// Solves `2^{nR} Λ(α₁, n) = Λ(π, n)` for the cone angle by bisection on
/// the increasing map `α ↦ log_cap_ratio(α, n)`.
pub fn solve_alpha1(n: u32, rate: f64) -> Result<ConeAngle> {
    check_n("solve_alpha1", n)?;
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::domain("solve_alpha1", format!("rate = {rate} must be finite and >= 0")));
    }
    if rate == 0.0 {
        return Ok(ConeAngle {
            alpha1: PI,
            n,
            rate,
            residual: 0.0,
        });
    }
    let target = -(n as f64) * rate * LN_2;
    let f = |a: f64| log_ratio_beta(a, n) - target;

    // sin²α must stay a normal float
    let floor = 1e-150;
    if f(floor) > 0.0 {
        return Err(Error::Unsatisfiable(format!(
            "n = {n}, R = {rate}: target log ratio {target:e} is below the smallest representable cap ({:e})",
            log_ratio_beta(floor, n)
        )));
    }
    let (mut lo, mut hi) = (floor, PI);
    let mut mid = 0.5 * (lo + hi);
    let mut res = f(mid);
    for _ in 0..2000 {
        if res.abs() < 1e-13 || hi - lo < 1e-15 * hi.max(1e-300) {
            break;
        }
        if res < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let next = 0.5 * (lo + hi);
        if next == mid {
            break;
        }
        mid = next;
        res = f(mid);
    }
    Ok(ConeAngle {
        alpha1: mid,
        n,
        rate,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const ALL: [CapRatioMethod; 3] = [
        CapRatioMethod::Recursion,
        CapRatioMethod::ClosedForm,
        CapRatioMethod::IncompleteBeta,
    ];

    #[test]
    fn full_sphere_areas() {
        assert_relative_eq!(log_full_sphere_area(2).unwrap(), (2.0 * PI).ln(), max_relative = 1e-14);
        assert_relative_eq!(log_full_sphere_area(3).unwrap(), (4.0 * PI).ln(), max_relative = 1e-14);
        // mpmath log(128 π^64 / Γ(65))
        assert_relative_eq!(log_full_sphere_area(128).unwrap(), -127.053_456_524_359_97, max_relative = 1e-13);
        assert!(log_full_sphere_area(1).is_err());
    }

    #[test]
    fn full_and_half_caps() {
        for n in [2, 3, 4, 7, 16, 64, 128] {
            for m in ALL {
                assert_eq!(log_cap_ratio(PI, n, m).unwrap(), 0.0);
                let half = log_cap_ratio(FRAC_PI_2, n, m).unwrap();
                assert!((half - 0.5f64.ln()).abs() < 1e-12, "n={n} {m:?}: {half}");
            }
        }
    }

    #[test]
    fn order_three_starts_from_one_minus_cos() {
        // Π(π, 3) = 2 gives Λ(π, 3) = 4π; the unshifted −cos α start would give 1.
        assert_relative_eq!(pi_recursion(PI, 3), 2.0, max_relative = 1e-15);
        let lam = log_pi_to_ratio(3).exp() * pi_recursion(PI, 3) * log_full_sphere_area(3).unwrap().exp();
        assert_relative_eq!(lam, 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(pi_closed_form(PI, 3).unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn small_cap_reference() {
        // mpmath: ln(∫₀^0.3 sin^62 / ∫₀^π sin^62)
        let want = -79.748_387_258_985_955;
        assert_relative_eq!(log_cap_ratio(0.3, 64, CapRatioMethod::IncompleteBeta).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(log_cap_ratio(0.3, 64, CapRatioMethod::Recursion).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_flags_cancellation() {
        // sin^62 at 0.3 is ~1e-33 of the leading α term
        assert!(matches!(
            log_cap_ratio(0.3, 64, CapRatioMethod::ClosedForm),
            Err(Error::Underflow { .. })
        ));
    }

    #[test]
    fn methods_agree_where_defined() {
        for n in 4..=40u32 {
            for k in 1..50 {
                let a = k as f64 * PI / 50.0;
                let beta = log_cap_ratio(a, n, CapRatioMethod::IncompleteBeta).unwrap().exp();
                let rec = log_cap_ratio(a, n, CapRatioMethod::Recursion).unwrap().exp();
                assert!((rec / beta - 1.0).abs() <= 1e-9, "n={n} α={a}");
                if let Ok(cf) = log_cap_ratio(a, n, CapRatioMethod::ClosedForm) {
                    assert!((cf.exp() / beta - 1.0).abs() <= 1e-9, "closed form n={n} α={a}");
                }
            }
        }
    }

    #[test]
    fn strictly_increasing_in_alpha() {
        for n in [2, 5, 32, 128, 512] {
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=400 {
                let v = log_cap_ratio(k as f64 * PI / 400.0, n, CapRatioMethod::IncompleteBeta).unwrap();
                // past the equator 1 - ratio underflows for large n
                assert!(v > prev || (v == 0.0 && prev > -1e-300), "n={n} k={k}");
                assert!(v <= 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn alpha1_trivial_cases() {
        assert_eq!(solve_alpha1(10, 0.0).unwrap().alpha1, PI);
        let c = solve_alpha1(2, 0.5).unwrap();
        assert!((c.alpha1 - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn alpha1_reference() {
        // mpmath findroot on the incomplete beta ratio
        let cases = [
            (8, 0.988_465_669_825_442_3),
            (16, 0.900_869_975_439_324_95),
            (64, 0.822_957_146_359_173_65),
            (128, 0.806_601_067_710_020_49),
        ];
        for (n, want) in cases {
            let c = solve_alpha1(n, 0.5).unwrap();
            assert_relative_eq!(c.alpha1, want, max_relative = 1e-12);
            assert!(c.residual.abs() <= 1e-12);
        }
    }

    #[test]
    fn alpha1_unsatisfiable() {
        assert!(matches!(solve_alpha1(4, 1e6), Err(Error::Unsatisfiable(_))));
        assert!(solve_alpha1(4, -1.0).is_err());
    }
}
