use super::signed_log::SignedLogValue;
use crate::error::{Error, Result};

/// Term budget for the forward series.
pub const MAX_TERMS: usize = 200_000;

const REL_STOP: f64 = 1e-16;

/// Kummer's confluent hypergeometric function `₁F₁(a; b; z)`.
///
/// Forward Taylor series with the term-ratio recurrence
/// `t_{k+1} = t_k (a+k) z / ((b+k)(k+1))`, accumulated in log domain so
/// that large parameters (`a` in the hundreds, `z` up to ~1e4) do not
/// overflow. Only the series is used; no asymptotic expansion. For `z < 0`
/// the series alternates and is only reliable for modest `|z|`.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<SignedLogValue> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::domain("kummer_1f1", "non-finite argument"));
    }
    if b <= 0.0 && b == b.floor() {
        return Err(Error::domain("kummer_1f1", format!("b = {b} is a non-positive integer")));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(SignedLogValue::ONE);
    }

    let mut term = SignedLogValue::ONE;
    let mut sum = SignedLogValue::ONE;
    let zl = SignedLogValue::from_f64(z);
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let num = a + kf;
        if num == 0.0 {
            // terminating polynomial
            return Ok(sum);
        }
        term = term * SignedLogValue::from_f64(num) * zl
            / SignedLogValue::from_f64((b + kf) * (kf + 1.0));
        sum = sum + term;
        // Stop once terms are shrinking and negligible. The ratio of
        // successive terms tends to z/k, so past k > 2|z| the tail is
        // bounded by a geometric series with ratio below 1/2.
        let ratio = (num * z / ((b + kf) * (kf + 1.0))).abs();
        if ratio < 1.0 && !sum.is_zero() && term.log_abs() - sum.log_abs() < REL_STOP.ln() {
            return Ok(sum);
        }
    }
    let ratio = ((a + MAX_TERMS as f64) * z / ((b + MAX_TERMS as f64) * (MAX_TERMS as f64 + 1.0))).abs();
    let bound = if ratio < 1.0 {
        (term.log_abs() - (1.0 - ratio).ln()).exp()
    } else {
        f64::INFINITY
    };
    Err(Error::Convergence {
        func: "kummer_1f1",
        terms: MAX_TERMS,
        partial: sum.to_f64(),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trivial_cases() {
        assert_eq!(kummer_1f1(3.5, 1.5, 0.0).unwrap(), SignedLogValue::ONE);
        let v = kummer_1f1(1.0, 2.0, 1.0).unwrap().to_f64();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-14);
        // 1F1(a; a; z) = e^z
        let v = kummer_1f1(2.5, 2.5, 3.0).unwrap().ln().unwrap();
        assert_relative_eq!(v, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn large_parameter_reference() {
        // mpmath hyp1f1(96.5, 0.5, 0.03)
        let v = kummer_1f1(96.5, 0.5, 0.03).unwrap().to_f64();
        assert_relative_eq!(v, 15.203_544_978_316_508, max_relative = 1e-12);
    }

    #[test]
    fn terminating_polynomial() {
        // 1F1(-2; 1; z) = 1 - 2z + z^2/2
        let z = 0.7;
        let v = kummer_1f1(-2.0, 1.0, z).unwrap().to_f64();
        assert_relative_eq!(v, 1.0 - 2.0 * z + z * z / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn huge_values_stay_in_log_domain() {
        let v = kummer_1f1(150.0, 1.5, 2000.0).unwrap();
        assert!(v.is_positive());
        // leading asymptotics: ln 1F1 ~ z + (a-b) ln z + lnΓ(b) - lnΓ(a)
        let approx = 2000.0 + 148.5 * 2000f64.ln() + libm::lgamma(1.5) - libm::lgamma(150.0);
        assert!((v.log_abs() - approx).abs() / approx < 0.05);
    }

    #[test]
    fn rejects_bad_b() {
        assert!(kummer_1f1(1.0, -2.0, 1.0).is_err());
        assert!(kummer_1f1(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn convergence_error_reports_partial_sum() {
        match kummer_1f1(1.0, 1.0, 1e9) {
            Err(Error::Convergence { terms, .. }) => assert_eq!(terms, MAX_TERMS),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn kummer_transformation() {
        // 1F1(a;b;z) = e^z 1F1(b-a;b;-z) where the alternating side is stable
        for &(a, b) in &[(0.5, 1.5), (2.0, 0.5), (3.7, 2.2), (10.0, 1.5), (0.3, 4.0)] {
            for &z in &[0.05, 0.3, 0.7, 1.0] {
                let lhs = kummer_1f1(a, b, z).unwrap().to_f64();
                let rhs = z.exp() * kummer_1f1(b - a, b, -z).unwrap().to_f64();
                assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs(), "a={a} b={b} z={z}: {lhs} vs {rhs}");
            }
        }
    }
}
