//! Sphere-packing lower bound: the conditional bound `Φ(α₁, n, A)` and its
//! expectation over the cascade coefficient.
//!
//! [`phi_exact_2d`] and the numerical expectation over the Gamma fit are
//! the reference. The saddle-point/Chebyshev form ([`phi_chebyshev`]), the
//! Gamma-moment closed form and the asymptotic form are accelerations
//! checked against it.

mod asymptotic;
mod exact;
mod expected;
pub mod ledger;
mod lemma;
mod wald;

pub use asymptotic::{asymptotic_bound, g_factor, AsymptoticMode, AsymptoticValue};
pub use exact::{log_radial_integral, phi_exact_2d};
pub use expected::{
    closed_form_as_printed, expected_bound, expected_bound_with, numeric_expectation, resolve_variance_interpretation,
    BoundQuery, ClosedFormDetail, CurvePoint, Method, NodeDiagnostic, VarianceResolution,
};
pub use lemma::{
    lemma1, log_moment_quadrature, log_moment_recurrence, resolve_lemma_variant, LemmaResolution, LemmaRoute,
    LemmaValue, LemmaVariant, LowerLimit, MAX_LOST_DIGITS,
};
pub use wald::{
    chebyshev_nodes, nabla, phi_chebyshev, phi_wald_1d, wald_inner, ChebyshevNode, DeltaReading, QuadOrder,
    VarianceInterpretation, WaldVariance, ADAPTIVE_MAX, ADAPTIVE_START, ADAPTIVE_TOL,
};

use crate::specfun::SignedLogValue;

/// `Φ = Q + integral term`, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalBound {
    pub value: f64,
    /// Log of the unclamped sum; `-inf` when it is not positive.
    pub log_value: f64,
    pub q_term: f64,
    pub log_q_term: f64,
    pub integral_term: SignedLogValue,
    /// Set when the unclamped sum exceeded 1.
    pub clamped: bool,
    /// Chebyshev nodes used, where applicable.
    pub quad_order: Option<usize>,
}

impl ConditionalBound {
    pub(crate) fn from_parts(log_q: f64, integral_term: SignedLogValue, quad_order: Option<usize>) -> Self {
        let raw = SignedLogValue::from_log(log_q) + integral_term;
        let log_value = raw.ln().unwrap_or(f64::NEG_INFINITY);
        let clamped = log_value > 0.0;
        ConditionalBound {
            value: log_value.exp().min(1.0),
            log_value,
            q_term: log_q.exp(),
            log_q_term: log_q,
            integral_term,
            clamped,
            quad_order,
        }
    }

    /// Log of the clamped value.
    pub fn log_clamped(&self) -> f64 {
        self.log_value.min(0.0)
    }
}
