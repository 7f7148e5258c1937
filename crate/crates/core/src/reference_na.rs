//! Normal-approximation reference curve (real AWGN, Gaussian input),
//! conditional on `A` and averaged over the cascade coefficient.
//!
//! ```text
//! ε(A) = Q((n C(γ) - n R ln 2 + ½ ln n) / √(n V(γ))),  γ = A² snr
//! C = ½ ln(1 + γ),  V = γ(γ + 2) / (2 (γ + 1)²)   [nats]
//! ```
//!
//! This is the usual finite-blocklength baseline, not a bound.

use crate::channel::{analytic_moments, gamma_fit, sample_a, McEstimate, RisChannelSpec};
use crate::error::{Error, Result};
use crate::quad::{integrate_log, QuadOptions};
use crate::specfun::log_gaussian_q;
use std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Quadrature against the Gamma fit.
    Quadrature,
    /// Mean over sampled cascade coefficients.
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaQuery {
    pub n: u32,
    pub rate: f64,
    pub snr: f64,
    pub averaging: Averaging,
}

impl NaQuery {
    pub fn new(n: u32, rate: f64, snr: f64) -> Self {
        NaQuery {
            n,
            rate,
            snr,
            averaging: Averaging::Quadrature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Usage("n must be at least 1".into()));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Usage(format!("rate = {} must be positive", self.rate)));
        }
        if !(self.snr.is_finite() && self.snr > 0.0) {
            return Err(Error::Usage(format!("snr = {} must be positive", self.snr)));
        }
        if let Averaging::MonteCarlo { trials: 0, .. } = self.averaging {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Averaged value; `std_error` is set for Monte Carlo averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// `ln ε(A)` for `γ = A² snr`.
pub fn log_na_conditional(n: u32, rate: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    let num = 0.5 * nf * gamma.ln_1p() - nf * rate * LN_2 + 0.5 * nf.ln();
    let v = gamma * (gamma + 2.0) / (2.0 * (gamma + 1.0).powi(2));
    if v <= 0.0 {
        return if num > 0.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    log_gaussian_q(num / (nf * v).sqrt())
}

pub fn na_error(query: &NaQuery, spec: &RisChannelSpec) -> Result<NaValue> {
    query.validate()?;
    let (n, rate, snr) = (query.n, query.rate, query.snr);
    match query.averaging {
        Averaging::Quadrature => {
            let fit = gamma_fit(&analytic_moments(spec)?)?;
            let (lo, hi) = fit.support_window();
            let (ln, _) = integrate_log(
                |amp| fit.log_pdf_unchecked(amp) + log_na_conditional(n, rate, amp * amp * snr),
                lo,
                hi,
                &QuadOptions::rel(1e-10).with_panels(16),
            )?;
            Ok(NaValue {
                value: ln.exp(),
                std_error: None,
            })
        }
        Averaging::MonteCarlo { trials, seed } => {
            let s = sample_a(spec, trials, seed)?;
            let eps: Vec<f64> = s
                .samples
                .iter()
                .map(|&amp| log_na_conditional(n, rate, amp * amp * snr).exp())
                .collect();
            let est = McEstimate::from_samples(&eps, seed);
            Ok(NaValue {
                value: est.mean,
                std_error: Some(est.std_error),
            })
        }
    }
}
