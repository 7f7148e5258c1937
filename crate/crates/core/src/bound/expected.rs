//! Expectation of the conditional bound over the Gamma-fitted cascade
//! coefficient, numerically or in closed form.

use super::asymptotic::asymptotic_bound;
use super::exact::phi_exact_2d;
use super::lemma::{lemma1, LemmaRoute, LemmaVariant, LowerLimit};
use super::wald::{
    adapt_order, chebyshev_nodes, delta, nabla, phi_chebyshev, phi_wald_1d, DeltaReading, QuadOrder,
    VarianceInterpretation, WaldVariance,
};
use super::ConditionalBound;
use crate::channel::{analytic_moments, gamma_fit, FadingMoments, GammaFit, RisChannelSpec};
use crate::error::{Error, Result};
use crate::quad::{integrate_log, QuadOptions};
use crate::specfun::{lgamma, log_gaussian_q, SignedLogValue};
use crate::spheregeom::solve_alpha1;
use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, LN_2};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Numerical expectation of the two-dimensional quadrature.
    Exact2d,
    /// Numerical expectation of the saddle-point angular integral.
    Wald1d,
    /// Numerical expectation of the Gauss–Chebyshev conditional bound.
    Chebyshev,
    /// Gamma-moment closed form.
    ClosedForm,
    Asymptotic,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact2d => "exact_2d",
            Method::Wald1d => "wald_1d",
            Method::Chebyshev => "chebyshev",
            Method::ClosedForm => "closed_form",
            Method::Asymptotic => "asymptotic",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Some(match s {
            "exact_2d" | "exact" | "oracle" => Method::Exact2d,
            "wald_1d" | "wald" => Method::Wald1d,
            "chebyshev" => Method::Chebyshev,
            "closed_form" | "closed" => Method::ClosedForm,
            "asymptotic" => Method::Asymptotic,
            _ => return None,
        })
    }
}

/// One bound evaluation. `snr` is the received `P_r/N₀` per unit channel
/// gain (the transmit SNR times the path gain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub n: u32,
    pub rate: f64,
    pub snr: f64,
    pub quad_order: QuadOrder,
    pub method: Method,
    pub variance: VarianceInterpretation,
    pub delta: DeltaReading,
    pub lemma_variant: LemmaVariant,
    /// Keep per-node values of `∇`, `Δ` and `X`.
    pub diagnostics: bool,
}

impl BoundQuery {
    /// Query with the oracle-selected readings: conditional `v` for the
    /// accelerations that allow it, `E[A²]` for the closed form.
    pub fn new(n: u32, rate: f64, snr: f64, method: Method) -> Self {
        let variance = match method {
            Method::ClosedForm => VarianceInterpretation::SecondMoment,
            _ => VarianceInterpretation::Conditional,
        };
        BoundQuery {
            n,
            rate,
            snr,
            quad_order: QuadOrder::Adaptive,
            method,
            variance,
            delta: DeltaReading::AmplitudeFree,
            lemma_variant: LemmaVariant::OracleSelected,
            diagnostics: false,
        }
    }

    pub fn with_variance(mut self, v: VarianceInterpretation) -> Self {
        self.variance = v;
        self
    }

    pub fn with_order(mut self, order: QuadOrder) -> Self {
        self.quad_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Usage(format!("n = {} must be at least 2", self.n)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Usage(format!("rate = {} must be positive", self.rate)));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::Usage(format!("snr = {} must be positive", self.snr)));
        }
        if let QuadOrder::Fixed(0) = self.quad_order {
            return Err(Error::Usage("quadrature order must be at least 1".into()));
        }
        Ok(())
    }
}

/// Intermediate values at one Chebyshev node of the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDiagnostic {
    pub s: f64,
    pub nabla: f64,
    pub delta: f64,
    pub x: f64,
}

/// One curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub query: BoundQuery,
    pub alpha1: f64,
    pub expected_bound: f64,
    pub log_expected_bound: f64,
    /// `E[Q(A√(n·snr))]`, reported by the closed form.
    pub q_expectation: Option<f64>,
    pub quad_order_used: Option<usize>,
    /// Some conditional value (or the closed-form total) exceeded 1.
    pub clamped: bool,
    pub nodes: Vec<NodeDiagnostic>,
    /// Lemma evaluations by route: `(kummer, recurrence)`.
    pub lemma_routes: (usize, usize),
}

/// Numerical `∫ f_A(A) Φ(A) dA` over the Gamma fit, in log domain.
///
/// Returns `(ln E, any clamped)`.
pub fn numeric_expectation<F>(fit: &GammaFit, mut phi: F) -> Result<(f64, bool)>
where
    F: FnMut(f64) -> Result<ConditionalBound>,
{
    let (lo, hi) = fit.support_window();
    let failure = RefCell::new(None);
    let mut clamped = false;
    let g = |amp: f64| {
        let lp = fit.log_pdf_unchecked(amp);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        match phi(amp) {
            Ok(c) => {
                clamped |= c.clamped;
                lp + c.log_clamped()
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (ln, _) = integrate_log(g, lo, hi, &QuadOptions::rel(1e-8).with_panels(4).with_scan(32))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok((ln, clamped))
}

pub fn expected_bound(query: &BoundQuery, spec: &RisChannelSpec) -> Result<CurvePoint> {
    let moments = analytic_moments(spec)?;
    expected_bound_with(query, &moments)
}

/// As [`expected_bound`], from the moments directly.
pub fn expected_bound_with(query: &BoundQuery, moments: &FadingMoments) -> Result<CurvePoint> {
    query.validate()?;
    let fit = gamma_fit(moments)?;
    let alpha1 = solve_alpha1(query.n, query.rate)?.alpha1;
    let (n, snr) = (query.n, query.snr);
    let mut point = CurvePoint {
        query: *query,
        alpha1,
        expected_bound: 0.0,
        log_expected_bound: f64::NEG_INFINITY,
        q_expectation: None,
        quad_order_used: None,
        clamped: false,
        nodes: Vec::new(),
        lemma_routes: (0, 0),
    };
    let (ln, clamped) = match query.method {
        Method::Exact2d => numeric_expectation(&fit, |amp| phi_exact_2d(alpha1, n, amp, snr))?,
        Method::Wald1d => numeric_expectation(&fit, |amp| {
            let var = WaldVariance::resolve(query.variance, Some(moments), amp)?;
            phi_wald_1d(alpha1, n, amp, snr, &var, query.delta)
        })?,
        Method::Chebyshev => {
            // pick K at the mean amplitude, then hold it fixed over A
            let k = match query.quad_order {
                QuadOrder::Fixed(k) => k,
                QuadOrder::Adaptive => phi_chebyshev(
                    alpha1,
                    n,
                    moments.k1,
                    snr,
                    Some(moments),
                    query.variance,
                    query.delta,
                    QuadOrder::Adaptive,
                )?
                .quad_order
                .unwrap_or(0),
            };
            point.quad_order_used = Some(k);
            numeric_expectation(&fit, |amp| {
                phi_chebyshev(
                    alpha1,
                    n,
                    amp,
                    snr,
                    Some(moments),
                    query.variance,
                    query.delta,
                    QuadOrder::Fixed(k.max(1)),
                )
            })?
        }
        Method::ClosedForm => {
            let d = closed_form(query, moments, &fit, alpha1)?;
            point.q_expectation = Some(d.q_expectation);
            point.quad_order_used = Some(d.order);
            point.nodes = if query.diagnostics { d.nodes } else { Vec::new() };
            point.lemma_routes = d.lemma_routes;
            let total = SignedLogValue::from_f64(d.q_expectation) + d.integral;
            let ln = total.ln().ok_or_else(|| {
                Error::OutOfRegime(format!("closed form evaluates to {total}, not a probability"))
            })?;
            (ln, ln > 0.0)
        }
        Method::Asymptotic => {
            let a = asymptotic_bound(query, moments, &fit, alpha1)?;
            (a.log_value, a.log_value > 0.0)
        }
    };
    point.log_expected_bound = ln;
    point.expected_bound = ln.exp().min(1.0);
    point.clamped = clamped;
    Ok(point)
}

/// Pieces of the closed-form expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormDetail {
    pub q_expectation: f64,
    pub integral: SignedLogValue,
    pub order: usize,
    pub nodes: Vec<NodeDiagnostic>,
    pub lemma_routes: (usize, usize),
}

fn constant_variance(query: &BoundQuery, moments: &FadingMoments) -> Result<f64> {
    let v = query.variance.constant(moments).ok_or_else(|| Error::Interpretation {
        interpretation: query.variance.name(),
        detail: "the closed form needs a constant variance slot; A² makes ∇ non-linear in A".into(),
    })?;
    if query.delta != DeltaReading::AmplitudeFree {
        return Err(Error::Unsupported(
            "the closed form needs Δ independent of A (amplitude_free reading)".into(),
        ));
    }
    WaldVariance::constant(v, 1.0, query.variance.name())?;
    Ok(v)
}

/// Per-node `(ln weight·Δ·∇^{n-1}·sin^{n-2}, X, diagnostic)` for `K` nodes.
fn closed_form_nodes(n: u32, snr: f64, v: f64, alpha1: f64, k: usize) -> Result<Vec<(f64, f64, NodeDiagnostic)>> {
    let nf = n as f64;
    let unit = WaldVariance::constant(v, 1.0, "constant")?;
    chebyshev_nodes(alpha1, k)
        .into_iter()
        .map(|node| {
            let nab = nabla(node.s, n, snr, v)?;
            let d = delta(node.s, n, 1.0, snr, &unit, DeltaReading::AmplitudeFree);
            let x = 0.5 * nf * snr - 0.5 * nab * nab;
            if !(x > 0.0) {
                return Err(Error::OutOfRegime(format!(
                    "X = n·snr/2 - ∇²/2 = {x:e} <= 0 at node s = {} (n = {n}, snr = {snr:e}, v = {v}); \
                     the A-integral of the closed form diverges",
                    node.s
                )));
            }
            let log_w = node.log_weight + d.ln() + (nf - 1.0) * nab.ln() + (nf - 2.0) * node.s.sin().ln();
            Ok((
                log_w,
                x,
                NodeDiagnostic {
                    s: node.s,
                    nabla: nab,
                    delta: d,
                    x,
                },
            ))
        })
        .collect()
}

/// `E[Q(A√(n·snr))]` by quadrature over the fit.
fn q_expectation(fit: &GammaFit, n: u32, snr: f64) -> Result<f64> {
    let (lo, hi) = fit.support_window();
    let scale = (n as f64 * snr).sqrt();
    let (ln, _) = integrate_log(
        |amp| fit.log_pdf_unchecked(amp) + log_gaussian_q(amp * scale),
        lo,
        hi,
        &QuadOptions::rel(1e-10).with_panels(16),
    )?;
    Ok(ln.exp())
}

fn closed_form(query: &BoundQuery, moments: &FadingMoments, fit: &GammaFit, alpha1: f64) -> Result<ClosedFormDetail> {
    if alpha1 > FRAC_PI_2 {
        return Err(Error::OutOfRegime(format!(
            "alpha1 = {alpha1} > π/2 (n·R < 1); the closed form assumes α₁ < π/2"
        )));
    }
    let v = constant_variance(query, moments)?;
    let (n, snr) = (query.n, query.snr);
    let nf = n as f64;
    let a_exp = fit.a + nf - 1.0;
    let slope = 1.0 / fit.b;
    let log_front = (nf - 1.0).ln() - (nf - 1.0) - 0.5 * (nf - 1.0) * LN_2 - lgamma(0.5 * (nf + 1.0))
        - (fit.a + 1.0) * fit.b.ln()
        - lgamma(fit.a + 1.0);
    let routes = RefCell::new((0usize, 0usize));
    let eval = |k: usize| -> Result<SignedLogValue> {
        let mut terms = Vec::with_capacity(k);
        for (log_w, x, _) in closed_form_nodes(n, snr, v, alpha1, k)? {
            let l = lemma1(a_exp, slope, x, query.lemma_variant, LowerLimit::Zero)?;
            let mut r = routes.borrow_mut();
            match l.route {
                LemmaRoute::Kummer => r.0 += 1,
                LemmaRoute::Recurrence => r.1 += 1,
            }
            terms.push(SignedLogValue::from_log(log_front + log_w) * l.value);
        }
        Ok(SignedLogValue::sum(terms))
    };
    let (integral, order) = adapt_order(query.quad_order, eval)?;
    let nodes = if query.diagnostics {
        closed_form_nodes(n, snr, v, alpha1, order)?.into_iter().map(|t| t.2).collect()
    } else {
        Vec::new()
    };
    Ok(ClosedFormDetail {
        q_expectation: q_expectation(fit, n, snr)?,
        integral,
        order,
        nodes,
        lemma_routes: routes.into_inner(),
    })
}

/// The expected-bound closed form exactly as typeset: `2^{(n+1)/2}`,
/// `b^{a+n} Γ(a+n)`, no `(n-1)` factor, both Kummer functions with middle
/// parameter ½, and the weight `(π/2 - α₁) w_i √(1 - ψ_i²)`. Kept for the
/// discrepancy report; it is not a probability.
pub fn closed_form_as_printed(query: &BoundQuery, moments: &FadingMoments, k: usize) -> Result<SignedLogValue> {
    query.validate()?;
    let fit = gamma_fit(moments)?;
    let alpha1 = solve_alpha1(query.n, query.rate)?.alpha1;
    let v = constant_variance(query, moments)?;
    let nf = query.n as f64;
    let log_front = -(nf - 1.0) - 0.5 * (nf + 1.0) * LN_2 - (fit.a + nf) * fit.b.ln() - lgamma(fit.a + nf)
        - lgamma(0.5 * (nf + 1.0));
    let mut terms = Vec::with_capacity(k);
    for (log_w, x, _) in closed_form_nodes(query.n, query.snr, v, alpha1, k)? {
        // the printed weight lacks the 1/2 of the interval map
        let l = lemma1(fit.a + nf - 1.0, 1.0 / fit.b, x, LemmaVariant::AsPrintedExpectation, LowerLimit::Zero)?;
        terms.push(SignedLogValue::from_log(log_front + log_w + 2.0 * LN_2) * l.value);
    }
    Ok(SignedLogValue::sum(terms))
}

/// Outcome of comparing the variance readings against the exact bound.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceResolution {
    pub selected: VarianceInterpretation,
    /// Worst `|ln(chebyshev/exact)|` per interpretation; infinite when the
    /// reading fails to evaluate.
    pub gaps: Vec<(VarianceInterpretation, f64)>,
}

/// Picks the variance reading whose Chebyshev bound tracks the exact
/// conditional bound best on a fixed probe grid; computed once.
pub fn resolve_variance_interpretation() -> Result<VarianceResolution> {
    static CACHE: OnceLock<Result<VarianceResolution>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            let moments = analytic_moments(&RisChannelSpec::new(4, 1.0, 0.5))?;
            let probes = [(16u32, 1.0, 1.0), (32, 1.0, 0.5), (32, 2.0, 1.0), (8, 0.5, 4.0)];
            let mut gaps = Vec::new();
            for interp in [
                VarianceInterpretation::VarA,
                VarianceInterpretation::SecondMoment,
                VarianceInterpretation::Conditional,
            ] {
                let mut worst: f64 = 0.0;
                for &(n, amp, snr) in &probes {
                    let alpha1 = solve_alpha1(n, 0.5)?.alpha1;
                    let exact = phi_exact_2d(alpha1, n, amp, snr)?;
                    let gap = match phi_chebyshev(
                        alpha1,
                        n,
                        amp,
                        snr,
                        Some(&moments),
                        interp,
                        DeltaReading::AmplitudeFree,
                        QuadOrder::Fixed(128),
                    ) {
                        Ok(c) => (c.log_value - exact.log_value).abs(),
                        Err(_) => f64::INFINITY,
                    };
                    worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
                }
                gaps.push((interp, worst));
            }
            let selected = gaps
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|g| g.0)
                .expect("three candidates");
            Ok(VarianceResolution { selected, gaps })
        })
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkBudget;
    use approx::assert_relative_eq;

    fn spec4() -> RisChannelSpec {
        RisChannelSpec::new(4, 1.0, 0.5)
    }

    fn rx_snr(tx_db: f64) -> f64 {
        LinkBudget::default().rx_snr_from_tx_db(tx_db)
    }

    #[test]
    fn oracle_expectation_reference() {
        // independent 1-D oracle, N_ris = 4 at 36 dB transmit SNR
        let q = BoundQuery::new(64, 0.5, rx_snr(36.0), Method::Exact2d);
        let p = expected_bound(&q, &spec4()).unwrap();
        assert_relative_eq!(p.expected_bound, 0.174_319_008, max_relative = 1e-5);
    }

    #[test]
    fn closed_form_matches_its_numerical_counterpart() {
        let moments = analytic_moments(&spec4()).unwrap();
        let fit = gamma_fit(&moments).unwrap();
        let q = BoundQuery::new(64, 0.5, rx_snr(45.0), Method::ClosedForm);
        let cf = expected_bound(&q, &spec4()).unwrap();
        let k = cf.quad_order_used.unwrap();
        let alpha1 = cf.alpha1;
        // same v, same nodes, unclamped, integrated numerically
        let var = VarianceInterpretation::SecondMoment;
        let (lo, hi) = fit.support_window();
        let (ln, _) = integrate_log(
            |amp| {
                let c = phi_chebyshev(alpha1, 64, amp, q.snr, Some(&moments), var, DeltaReading::AmplitudeFree, QuadOrder::Fixed(k))
                    .unwrap();
                fit.log_pdf_unchecked(amp) + c.log_value
            },
            lo,
            hi,
            &QuadOptions::rel(1e-10).with_panels(16),
        )
        .unwrap();
        assert_relative_eq!(cf.log_expected_bound, ln, max_relative = 1e-7);
    }

    #[test]
    fn closed_form_out_of_regime_and_interpretation_errors() {
        let q = BoundQuery::new(64, 0.5, rx_snr(20.0), Method::ClosedForm);
        assert!(matches!(expected_bound(&q, &spec4()), Err(Error::OutOfRegime(_))));
        let q = q.with_variance(VarianceInterpretation::Conditional);
        assert!(matches!(expected_bound(&q, &spec4()), Err(Error::Interpretation { .. })));
    }

    #[test]
    fn printed_closed_form_is_not_a_probability_match() {
        let moments = analytic_moments(&spec4()).unwrap();
        let q = BoundQuery::new(64, 0.5, rx_snr(45.0), Method::ClosedForm).with_order(QuadOrder::Fixed(64));
        let printed = closed_form_as_printed(&q, &moments, 64).unwrap();
        let ours = expected_bound(&q, &spec4()).unwrap();
        let gap = match printed.ln() {
            Some(l) => (l - ours.log_expected_bound).abs(),
            None => f64::INFINITY,
        };
        assert!(gap > 1.0);
    }

    #[test]
    fn chebyshev_expectation_tracks_oracle() {
        let q = BoundQuery::new(64, 0.5, rx_snr(36.0), Method::Chebyshev);
        let c = expected_bound(&q, &spec4()).unwrap();
        assert!((c.expected_bound / 0.17432 - 1.0).abs() < 0.02);
        assert!(c.quad_order_used.unwrap() >= 32);
    }

    #[test]
    fn conditional_reading_is_selected() {
        let r = resolve_variance_interpretation().unwrap();
        assert_eq!(r.selected, VarianceInterpretation::Conditional);
    }

    #[test]
    fn query_validation() {
        assert!(BoundQuery::new(1, 0.5, 1.0, Method::Exact2d).validate().is_err());
        assert!(BoundQuery::new(8, 0.0, 1.0, Method::Exact2d).validate().is_err());
        assert!(BoundQuery::new(8, 0.5, -1.0, Method::Exact2d).validate().is_err());
        assert!(BoundQuery::new(8, 0.5, 1.0, Method::Exact2d)
            .with_order(QuadOrder::Fixed(0))
            .validate()
            .is_err());
        assert_eq!(Method::parse("closed_form"), Some(Method::ClosedForm));
        assert_eq!(Method::parse("nope"), None);
    }
}

