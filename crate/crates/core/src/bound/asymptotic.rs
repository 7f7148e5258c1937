//! Large-`n` form of the bound.
//!
//! ```text
//! Φ_asy(A) = √(n-1) / (6n (A√s + 1)) · exp{-((A√s + 1)² + 3)/2
//!            - n (A² s/2 - ½ G(α₁,A) A √s cos α₁ - ln(G(α₁,A) sin α₁))}
//! G(α, A)  = A/2 (√s cos α + √(s cos²α + 4/v))
//! ```
//!
//! With a constant `v`, `G(α, A) = A·G(α)` and replacing `1/(A√s + 1)` by
//! `1/(A√s)` makes the expectation a single Lemma term.

use super::expected::BoundQuery;
use super::lemma::{lemma1, LowerLimit};
use super::wald::VarianceInterpretation;
use crate::channel::{FadingMoments, GammaFit};
use crate::error::{Error, Result};
use crate::quad::{integrate_log, QuadOptions};
use crate::specfun::lgamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticMode {
    /// Constant `v`; Lemma closed form.
    ClosedForm,
    /// `v = A²`; expectation by quadrature.
    NumericConditional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticValue {
    pub value: f64,
    pub log_value: f64,
    pub mode: AsymptoticMode,
}

/// `G(α, A)` for variance slot `v`.
pub fn g_factor(alpha: f64, amp: f64, snr: f64, v: f64) -> f64 {
    let c = alpha.cos();
    let rs = snr.sqrt();
    0.5 * amp * (rs * c + (snr * c * c + 4.0 / v).sqrt())
}

/// `ln Φ_asy(A)`.
fn log_conditional(alpha1: f64, n: u32, amp: f64, snr: f64, g: f64) -> f64 {
    let nf = n as f64;
    let t = amp * snr.sqrt() + 1.0;
    0.5 * (nf - 1.0).ln() - (6.0 * nf).ln() - t.ln() - 0.5 * (t * t + 3.0)
        - nf * (0.5 * amp * amp * snr - 0.5 * g * amp * snr.sqrt() * alpha1.cos() - (g * alpha1.sin()).ln())
}

pub fn asymptotic_bound(
    query: &BoundQuery,
    moments: &FadingMoments,
    fit: &GammaFit,
    alpha1: f64,
) -> Result<AsymptoticValue> {
    let (n, s) = (query.n, query.snr);
    let nf = n as f64;
    match query.variance.constant(moments) {
        Some(v) => {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Interpretation {
                    interpretation: query.variance.name(),
                    detail: format!("v = {v} is not a positive variance"),
                });
            }
            let g = g_factor(alpha1, 1.0, s, v);
            let rs = s.sqrt();
            let xi = fit.b / (1.0 + fit.b * rs);
            let x2 = 0.5 * (nf + 1.0) * s - 0.5 * nf * g * alpha1.cos() * rs;
            if !(x2 > 0.0) {
                return Err(Error::OutOfRegime(format!(
                    "asymptotic exponent X = {x2:e} <= 0 (n = {n}, snr = {s:e}); the A-integral diverges"
                )));
            }
            let l = lemma1(fit.a + nf - 1.0, 1.0 / xi, x2, query.lemma_variant, LowerLimit::Zero)?;
            let ln_j = l.value.ln().ok_or_else(|| {
                Error::OutOfRegime(format!("asymptotic Lemma term is {} (not positive)", l.value))
            })?;
            let log_value = 0.5 * (nf - 1.0).ln() - (6.0 * nf).ln() - 0.5 * s.ln() - 2.0
                + nf * (g * alpha1.sin()).ln()
                - (fit.a + 1.0) * fit.b.ln()
                - lgamma(fit.a + 1.0)
                + ln_j;
            Ok(AsymptoticValue {
                value: log_value.exp().min(1.0),
                log_value,
                mode: AsymptoticMode::ClosedForm,
            })
        }
        None => {
            debug_assert_eq!(query.variance, VarianceInterpretation::Conditional);
            let (lo, hi) = fit.support_window();
            let (log_value, _) = integrate_log(
                |amp| {
                    let lp = fit.log_pdf_unchecked(amp);
                    if lp == f64::NEG_INFINITY || amp <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let g = g_factor(alpha1, amp, s, amp * amp);
                    lp + log_conditional(alpha1, n, amp, s, g).min(0.0)
                },
                lo,
                hi,
                &QuadOptions::rel(1e-8).with_panels(16),
            )?;
            Ok(AsymptoticValue {
                value: log_value.exp().min(1.0),
                log_value,
                mode: AsymptoticMode::NumericConditional,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::expected::{expected_bound, Method};
    use crate::channel::{analytic_moments, gamma_fit, LinkBudget, RisChannelSpec};
    use approx::assert_relative_eq;

    #[test]
    fn g_factorises_in_amplitude() {
        for &(alpha, amp, s, v) in &[(0.7, 2.0, 3.0, 1.5), (1.2, 0.3, 40.0, 9.0), (0.1, 7.0, 0.01, 0.2)] {
            assert_relative_eq!(g_factor(alpha, amp, s, v), amp * g_factor(alpha, 1.0, s, v), max_relative = 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_quadrature_of_its_integrand() {
        let spec = RisChannelSpec::new(64, 1.0, 0.5);
        let m = analytic_moments(&spec).unwrap();
        let fit = gamma_fit(&m).unwrap();
        let snr = LinkBudget::default().rx_snr_from_tx_db(20.0);
        let q = BoundQuery::new(64, 0.5, snr, Method::Asymptotic).with_variance(VarianceInterpretation::SecondMoment);
        let alpha1 = crate::spheregeom::solve_alpha1(64, 0.5).unwrap().alpha1;
        let cf = asymptotic_bound(&q, &m, &fit, alpha1).unwrap();
        assert_eq!(cf.mode, AsymptoticMode::ClosedForm);
        let v = m.second_moment;
        let (lo, hi) = fit.support_window();
        let nf = 64.0;
        let (ln, _) = integrate_log(
            |amp| {
                let g = g_factor(alpha1, amp, snr, v);
                let t = amp * snr.sqrt();
                fit.log_pdf_unchecked(amp) + 0.5 * (nf - 1.0f64).ln() - (6.0 * nf).ln() - t.ln()
                    - 0.5 * ((t + 1.0) * (t + 1.0) + 3.0)
                    - nf * (0.5 * amp * amp * snr - 0.5 * g * amp * snr.sqrt() * alpha1.cos() - (g * alpha1.sin()).ln())
            },
            lo.max(1e-12),
            hi,
            &QuadOptions::rel(1e-10).with_panels(16),
        )
        .unwrap();
        // the closed form keeps e^{-(t² + 4)/2 - t} as e^{-2}·e^{-t²/2 - t}
        assert_relative_eq!(cf.log_value, ln, max_relative = 1e-6);
    }

    #[test]
    fn conditional_mode_is_numeric() {
        let spec = RisChannelSpec::new(64, 1.0, 0.5);
        let snr = LinkBudget::default().rx_snr_from_tx_db(10.0);
        let q = BoundQuery::new(128, 0.5, snr, Method::Asymptotic);
        let p = expected_bound(&q, &spec).unwrap();
        assert!(p.expected_bound > 0.0 && p.expected_bound < 1.0);
    }
}
