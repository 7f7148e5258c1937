//! Saddle-point replacement of the radial integral and the resulting
//! one-dimensional angular integral, evaluated either adaptively or with a
//! first-kind Gauss–Chebyshev rule.
//!
//! The radial integrand `r^{n-1} exp(-r²/2 + ρ r cos α)` peaks at
//!
//! ```text
//! A∇(α, n) = √n A (½ √snr cos α + √(snr cos²α / 4 + (n-1)/(n v)))
//! ```
//!
//! which is the exact peak when `v = A²`. The integral becomes
//! `√(2π) Δ (A∇/e)^{n-1} exp((A∇)²/2)` with the width correction
//!
//! ```text
//! Δ = ½ [ (1 + (v/4)(√(x² + 4/v) - x)²)^{-1/2} + √(∇² / (∇² + (n-1)/v)) ].
//! ```

use super::exact::{angular_range, check_args};
use super::ConditionalBound;
use crate::channel::FadingMoments;
use crate::error::{Error, Result};
use crate::quad::{gauss_chebyshev, integrate_log, QuadOptions};
use crate::specfun::{lgamma, log_gaussian_q, SignedLogValue};
use std::f64::consts::{LN_2, PI};

/// What stands in for the printed "k₂ − k₁²" inside `∇` and `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VarianceInterpretation {
    /// `Var[A] = k₂`.
    VarA,
    /// `E[A²] = k₂ + k₁²`.
    SecondMoment,
    /// The squared realisation `A²`, which makes `A∇` the exact radial peak.
    /// Not compatible with the Gamma-moment closed form.
    #[default]
    Conditional,
}

impl VarianceInterpretation {
    pub fn name(&self) -> &'static str {
        match self {
            VarianceInterpretation::VarA => "var_a",
            VarianceInterpretation::SecondMoment => "second_moment",
            VarianceInterpretation::Conditional => "conditional",
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, VarianceInterpretation::Conditional)
    }

    /// The constant `v`, or `None` for the conditional reading.
    pub fn constant(&self, moments: &FadingMoments) -> Option<f64> {
        match self {
            VarianceInterpretation::VarA => Some(moments.k2),
            VarianceInterpretation::SecondMoment => Some(moments.second_moment),
            VarianceInterpretation::Conditional => None,
        }
    }
}

/// Whether the amplitude appears in the first term of `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DeltaReading {
    /// `x = √snr cos α`, matching the `Δ(α, n)` signature; this keeps `Δ`
    /// independent of `A` so the expectation over `A` stays closed-form.
    #[default]
    AmplitudeFree,
    /// `x = A √snr cos α`, as written in the body of `Δ`.
    WithAmplitude,
}

impl DeltaReading {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaReading::AmplitudeFree => "amplitude_free",
            DeltaReading::WithAmplitude => "with_amplitude",
        }
    }
}

/// `v` for one evaluation: either the constant or `A²`.
///
/// Everything below is written in terms of `A²/v`, which stays finite at
/// `A = 0` under the conditional reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldVariance {
    pub v: f64,
    pub amp_sq_over_v: f64,
}

impl WaldVariance {
    pub fn resolve(interp: VarianceInterpretation, moments: Option<&FadingMoments>, amp: f64) -> Result<Self> {
        match interp.constant_or_none(moments)? {
            Some(v) => Self::constant(v, amp, interp.name()),
            None => Ok(WaldVariance {
                v: amp * amp,
                amp_sq_over_v: 1.0,
            }),
        }
    }

    pub fn constant(v: f64, amp: f64, name: &'static str) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Interpretation {
                interpretation: name,
                detail: format!("variance slot evaluates to {v}; the square roots in ∇ and Δ are undefined"),
            });
        }
        Ok(WaldVariance {
            v,
            amp_sq_over_v: amp * amp / v,
        })
    }
}

impl VarianceInterpretation {
    fn constant_or_none(&self, moments: Option<&FadingMoments>) -> Result<Option<f64>> {
        if !self.is_constant() {
            return Ok(None);
        }
        match moments {
            Some(m) => Ok(self.constant(m)),
            None => Err(Error::Usage(format!(
                "variance interpretation `{}` needs the fading moments",
                self.name()
            ))),
        }
    }
}

/// `∇(α, n)` per unit amplitude; requires a constant `v`.
pub fn nabla(alpha: f64, n: u32, snr: f64, v: f64) -> Result<f64> {
    WaldVariance::constant(v, 1.0, "constant")?;
    let nf = n as f64;
    let c = alpha.cos();
    Ok(nf.sqrt() * (0.5 * snr.sqrt() * c + (0.25 * snr * c * c + (nf - 1.0) / (nf * v)).sqrt()))
}

/// `A∇(α, n)`.
pub(crate) fn nabla_amp(alpha: f64, n: u32, amp: f64, snr: f64, var: &WaldVariance) -> f64 {
    let nf = n as f64;
    let y = amp * snr.sqrt() * alpha.cos();
    nf.sqrt() * (0.5 * y + (0.25 * y * y + (nf - 1.0) / nf * var.amp_sq_over_v).sqrt())
}

/// `Δ` at angle `α`.
pub(crate) fn delta(alpha: f64, n: u32, amp: f64, snr: f64, var: &WaldVariance, reading: DeltaReading) -> f64 {
    let x = match reading {
        DeltaReading::AmplitudeFree => snr.sqrt() * alpha.cos(),
        DeltaReading::WithAmplitude => amp * snr.sqrt() * alpha.cos(),
    };
    // (v/4)(√(x² + 4/v) - x)² = (√(u² + 1) - u)² with u = x √v / 2
    let u = 0.5 * x * var.v.sqrt();
    let w = (u * u + 1.0).sqrt() - u;
    let first = 1.0 / (1.0 + w * w).sqrt();
    // ∇²/(∇² + (n-1)/v) = (A∇)² / ((A∇)² + (n-1) A²/v)
    let na = nabla_amp(alpha, n, amp, snr, var);
    let m = (n as f64 - 1.0) * var.amp_sq_over_v;
    let second = if na == 0.0 && m == 0.0 {
        1.0
    } else {
        (na * na / (na * na + m)).sqrt()
    };
    0.5 * (first + second)
}

/// Saddle-point value of `∫₀^∞ r^{n-1} exp(-r²/2 + rA√(n·snr) cos α) dr`:
/// `√(2π) Δ (A∇/e)^{n-1} exp((A∇)²/2)`.
pub fn wald_inner(
    alpha: f64,
    n: u32,
    amp: f64,
    snr: f64,
    var: &WaldVariance,
    reading: DeltaReading,
) -> Result<SignedLogValue> {
    check_args(alpha, n, amp, snr)?;
    let na = nabla_amp(alpha, n, amp, snr, var);
    let d = delta(alpha, n, amp, snr, var, reading);
    let nf = n as f64;
    Ok(SignedLogValue::from_log(
        0.5 * (2.0 * PI).ln() + d.ln() + (nf - 1.0) * (na.ln() - 1.0) + 0.5 * na * na,
    ))
}

/// `ln[(n-1) / (e^{n-1} 2^{(n-1)/2} Γ((n+1)/2))]`, the constant in front of
/// the angular integral once the radial integral is replaced.
fn log_wald_constant(n: u32) -> f64 {
    let nf = n as f64;
    (nf - 1.0).ln() - (nf - 1.0) - 0.5 * (nf - 1.0) * LN_2 - lgamma(0.5 * (nf + 1.0))
}

/// Log of the angular integrand after the radial step:
/// `Δ/(A∇ sin²α) · exp(-n(A² snr/2 - (A∇)²/(2n) - ln(A∇ sin α)))`.
fn log_angular_integrand(alpha: f64, n: u32, amp: f64, snr: f64, var: &WaldVariance, reading: DeltaReading) -> f64 {
    let nf = n as f64;
    let na = nabla_amp(alpha, n, amp, snr, var);
    let s = alpha.sin();
    let d = delta(alpha, n, amp, snr, var, reading);
    // the 1/(A∇) and (A∇)^n factors combine before taking logs so that
    // A = 0 gives a clean zero instead of ∞ - ∞
    let log_na = if na > 0.0 { (nf - 1.0) * na.ln() } else { f64::NEG_INFINITY };
    d.ln() + log_na + (nf - 2.0) * s.ln() - 0.5 * nf * amp * amp * snr + 0.5 * na * na
}

/// The angular integral by adaptive quadrature of the exact integrand.
pub fn phi_wald_1d(
    alpha1: f64,
    n: u32,
    amp: f64,
    snr: f64,
    var: &WaldVariance,
    reading: DeltaReading,
) -> Result<ConditionalBound> {
    check_args(alpha1, n, amp, snr)?;
    let rho = amp * (n as f64 * snr).sqrt();
    let log_q = log_gaussian_q(rho);
    let (lo, hi, sign) = angular_range(alpha1);
    if lo == hi {
        return Ok(ConditionalBound::from_parts(log_q, SignedLogValue::ZERO, None));
    }
    let g = |alpha: f64| log_angular_integrand(alpha, n, amp, snr, var, reading);
    let (log_int, _) = integrate_log(g, lo, hi, &QuadOptions::rel(1e-11).with_panels(8))?;
    let term = SignedLogValue::from_log(log_int + log_wald_constant(n)) * SignedLogValue::from_f64(sign);
    Ok(ConditionalBound::from_parts(log_q, term, None))
}

/// One Gauss–Chebyshev node mapped onto `(α₁, π/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevNode {
    pub s: f64,
    /// `ln[(π/2 - α₁)/2 · (π/K) · √(1 - ψ²)]`, without the sign of the
    /// interval length.
    pub log_weight: f64,
}

pub fn chebyshev_nodes(alpha1: f64, k: usize) -> Vec<ChebyshevNode> {
    let half = 0.5 * (std::f64::consts::FRAC_PI_2 - alpha1);
    let mid = 0.5 * (std::f64::consts::FRAC_PI_2 + alpha1);
    gauss_chebyshev(k)
        .into_iter()
        .map(|(psi, w)| ChebyshevNode {
            s: half * psi + mid,
            log_weight: half.abs().ln() + w.ln() + 0.5 * (1.0 - psi * psi).ln(),
        })
        .collect()
}

/// Angular integral term with a fixed number of nodes.
pub(crate) fn chebyshev_term(
    alpha1: f64,
    n: u32,
    amp: f64,
    snr: f64,
    var: &WaldVariance,
    reading: DeltaReading,
    k: usize,
) -> SignedLogValue {
    let sign = if alpha1 <= std::f64::consts::FRAC_PI_2 { 1.0 } else { -1.0 };
    let c = log_wald_constant(n);
    let sum = SignedLogValue::sum(chebyshev_nodes(alpha1, k).into_iter().map(|node| {
        SignedLogValue::from_log(node.log_weight + c + log_angular_integrand(node.s, n, amp, snr, var, reading))
    }));
    sum * SignedLogValue::from_f64(sign)
}

/// Node count policy for the Chebyshev rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadOrder {
    Fixed(usize),
    /// Start at 32 nodes and double until two successive values agree to
    /// `1e-4` relative or 512 nodes are reached.
    Adaptive,
}

impl Default for QuadOrder {
    fn default() -> Self {
        QuadOrder::Adaptive
    }
}

pub const ADAPTIVE_START: usize = 32;
pub const ADAPTIVE_MAX: usize = 512;
pub const ADAPTIVE_TOL: f64 = 1e-4;

/// Runs the adaptive doubling on `eval(K)` and returns `(value, K)`.
pub(crate) fn adapt_order<F>(order: QuadOrder, mut eval: F) -> Result<(SignedLogValue, usize)>
where
    F: FnMut(usize) -> Result<SignedLogValue>,
{
    match order {
        QuadOrder::Fixed(k) => {
            if k == 0 {
                return Err(Error::Usage("quadrature order must be at least 1".into()));
            }
            Ok((eval(k)?, k))
        }
        QuadOrder::Adaptive => {
            let mut k = ADAPTIVE_START;
            let mut prev = eval(k)?;
            while k < ADAPTIVE_MAX {
                k *= 2;
                let next = eval(k)?;
                let change = (next - prev).abs();
                let converged = change.is_zero()
                    || (!next.is_zero() && change.log_abs() - next.log_abs() < ADAPTIVE_TOL.ln());
                prev = next;
                if converged {
                    break;
                }
            }
            Ok((prev, k))
        }
    }
}

/// Conditional bound with the saddle-point radial step and the
/// Gauss–Chebyshev angular rule, with the `√(1 - ψ²)` change-of-variables
/// factor and the `(n-1)` surface constant.
#[allow(clippy::too_many_arguments)]
pub fn phi_chebyshev(
    alpha1: f64,
    n: u32,
    amp: f64,
    snr: f64,
    moments: Option<&FadingMoments>,
    interp: VarianceInterpretation,
    reading: DeltaReading,
    order: QuadOrder,
) -> Result<ConditionalBound> {
    check_args(alpha1, n, amp, snr)?;
    let var = WaldVariance::resolve(interp, moments, amp)?;
    let rho = amp * (n as f64 * snr).sqrt();
    let log_q = log_gaussian_q(rho);
    if alpha1 == std::f64::consts::FRAC_PI_2 {
        return Ok(ConditionalBound::from_parts(log_q, SignedLogValue::ZERO, Some(0)));
    }
    let (term, k) = adapt_order(order, |k| Ok(chebyshev_term(alpha1, n, amp, snr, &var, reading, k)))?;
    Ok(ConditionalBound::from_parts(log_q, term, Some(k)))
}
