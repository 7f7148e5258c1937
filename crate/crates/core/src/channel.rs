//! The cascaded Rician channel through a RIS with optimal phase alignment.
//!
//! With every element's phase shift cancelling the phases of both hops, the
//! end-to-end coefficient is `A = Σ_m |h_m| |g_m|`, a sum of `N_ris`
//! products of independent Rician envelopes. This module provides its
//! exact first two moments, the moment-matched Gamma density used by the
//! closed-form bound, a deterministic Monte Carlo sampler, and the Friis
//! link budget that converts transmit SNR into received SNR.

use crate::error::{Error, Result};
use crate::specfun::{gamma_p, laguerre_half, lgamma};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Element count and per-hop Rician parameters.
///
/// `omega_*` is the total envelope power `Ω = 2ζ² + η²` of a hop. The
/// default is `Ω = 1 + K`, i.e. unit scattered power `2ζ² = 1`; this is the
/// normalisation under which the textbook expressions
/// `E[A] = (π/4) N L_{1/2}(-K₁) L_{1/2}(-K₂)` and
/// `Var[A] = N((1+K₁)(1+K₂) - (π²/16) L²_{1/2}(-K₁) L²_{1/2}(-K₂))` hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisChannelSpec {
    pub n_ris: u32,
    pub k_factor_1: f64,
    pub k_factor_2: f64,
    pub omega_1: f64,
    pub omega_2: f64,
}

/// Rician shape and scale of one hop: LOS amplitude `η` and per-component
/// scattered standard deviation `ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianHop {
    pub los: f64,
    pub sigma: f64,
}

impl RicianHop {
    fn from_k_omega(k: f64, omega: f64) -> Self {
        RicianHop {
            los: (omega * k / (1.0 + k)).sqrt(),
            sigma: (omega / (2.0 * (1.0 + k))).sqrt(),
        }
    }

    pub fn k_factor(&self) -> f64 {
        self.los * self.los / (2.0 * self.sigma * self.sigma)
    }

    pub fn omega(&self) -> f64 {
        2.0 * self.sigma * self.sigma + self.los * self.los
    }

    /// `E|h| = ζ sqrt(π/2) L_{1/2}(-K)`.
    pub fn mean_envelope(&self) -> f64 {
        let l = laguerre_half(-self.k_factor()).expect("K >= 0");
        self.sigma * (0.5 * PI).sqrt() * l
    }
}

impl RisChannelSpec {
    pub fn new(n_ris: u32, k_factor_1: f64, k_factor_2: f64) -> Self {
        RisChannelSpec {
            n_ris,
            k_factor_1,
            k_factor_2,
            omega_1: 1.0 + k_factor_1,
            omega_2: 1.0 + k_factor_2,
        }
    }

    pub fn with_omega(mut self, omega_1: f64, omega_2: f64) -> Self {
        self.omega_1 = omega_1;
        self.omega_2 = omega_2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ris == 0 {
            return Err(Error::Usage("n_ris must be at least 1".into()));
        }
        for (name, k) in [("K1", self.k_factor_1), ("K2", self.k_factor_2)] {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::Usage(format!("{name} = {k} must be finite and >= 0")));
            }
        }
        for (name, w) in [("omega_1", self.omega_1), ("omega_2", self.omega_2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Usage(format!("{name} = {w} must be positive")));
            }
        }
        Ok(())
    }

    pub fn hops(&self) -> (RicianHop, RicianHop) {
        (
            RicianHop::from_k_omega(self.k_factor_1, self.omega_1),
            RicianHop::from_k_omega(self.k_factor_2, self.omega_2),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingMoments {
    /// `E[A]`
    pub k1: f64,
    /// `Var[A]`
    pub k2: f64,
    /// `E[A²] = k2 + k1²`
    pub second_moment: f64,
}

impl FadingMoments {
    pub fn new(k1: f64, k2: f64) -> Self {
        FadingMoments {
            k1,
            k2,
            second_moment: k2 + k1 * k1,
        }
    }
}

/// Exact mean and variance of `A`.
///
/// Each product `|h||g|` has mean `E|h| E|g|` and second moment `Ω₁ Ω₂`;
/// the `N_ris` terms are independent.
pub fn analytic_moments(spec: &RisChannelSpec) -> Result<FadingMoments> {
    spec.validate()?;
    let (h, g) = spec.hops();
    let m = h.mean_envelope() * g.mean_envelope();
    let n = spec.n_ris as f64;
    Ok(FadingMoments::new(n * m, n * (spec.omega_1 * spec.omega_2 - m * m)))
}

/// The moment expressions written directly in terms of `L_{1/2}(-K)`,
/// valid for the default normalisation `Ω = 1 + K`.
pub fn laguerre_moments(n_ris: u32, k_factor_1: f64, k_factor_2: f64) -> Result<FadingMoments> {
    let l1 = laguerre_half(-k_factor_1)?;
    let l2 = laguerre_half(-k_factor_2)?;
    let n = n_ris as f64;
    let k1 = 0.25 * PI * n * l1 * l2;
    let k2 = n * ((1.0 + k_factor_1) * (1.0 + k_factor_2) - PI * PI / 16.0 * (l1 * l2).powi(2));
    Ok(FadingMoments::new(k1, k2))
}

/// Moment-matched Gamma density `f(x) = x^a e^{-x/b} / (b^{a+1} Γ(a+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    /// shape minus one
    pub a: f64,
    /// scale
    pub b: f64,
}

impl GammaFit {
    pub fn shape(&self) -> f64 {
        self.a + 1.0
    }

    pub fn mean(&self) -> f64 {
        (self.a + 1.0) * self.b
    }

    pub fn variance(&self) -> f64 {
        (self.a + 1.0) * self.b * self.b
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain("pdf_a", format!("x = {x} < 0")));
        }
        Ok(self.log_pdf_unchecked(x))
    }

    pub(crate) fn log_pdf_unchecked(&self, x: f64) -> f64 {
        if x == 0.0 {
            return match self.a {
                a if a > 0.0 => f64::NEG_INFINITY,
                a if a == 0.0 => -self.b.ln(),
                _ => f64::INFINITY,
            };
        }
        self.a * x.ln() - x / self.b - (self.a + 1.0) * self.b.ln() - lgamma(self.a + 1.0)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        gamma_p(self.a + 1.0, x / self.b).expect("valid fit")
    }

    /// Interval outside of which the density carries less than ~1e-30 of
    /// its mass; used to bound expectation integrals.
    pub fn support_window(&self) -> (f64, f64) {
        let sd = self.variance().sqrt();
        (0.0, self.mean() + 60.0 * sd + 80.0 * self.b)
    }
}

pub fn gamma_fit(m: &FadingMoments) -> Result<GammaFit> {
    if !(m.k1 > 0.0 && m.k2 > 0.0) {
        return Err(Error::domain("gamma_fit", format!("moments k1 = {}, k2 = {} must be positive", m.k1, m.k2)));
    }
    Ok(GammaFit {
        a: m.k1 * m.k1 / m.k2 - 1.0,
        b: m.k2 / m.k1,
    })
}

pub fn pdf_a(x: f64, fit: &GammaFit) -> Result<f64> {
    fit.pdf(x)
}

/// Monte Carlo estimate of a mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error: (var / n).sqrt(),
            trials: samples.len() as u64,
            seed,
        }
    }
}

/// Samples of `A` with summary statistics.
#[derive(Debug, Clone)]
pub struct ChannelSamples {
    pub samples: Vec<f64>,
    pub mean: McEstimate,
    pub variance: f64,
    /// Standard error of the sample variance, `sqrt((m₄ - s⁴)/N)`.
    pub variance_std_error: f64,
}

/// Samples are generated in fixed-size blocks; block `i` always draws from
/// ChaCha stream `i` of the seed, so the output does not depend on how many
/// threads run.
pub(crate) const SAMPLE_BLOCK: usize = 1024;

pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// One draw of `A = Σ |h_m||g_m|`, with each envelope the modulus of a
/// complex Gaussian whose mean `η` lies on the real axis.
pub(crate) fn draw_cascade<R: rand::Rng>(rng: &mut R, h: &RicianHop, g: &RicianHop, n_ris: u32) -> f64 {
    let mut a = 0.0;
    for _ in 0..n_ris {
        let hr: f64 = StandardNormal.sample(rng);
        let hi: f64 = StandardNormal.sample(rng);
        let gr: f64 = StandardNormal.sample(rng);
        let gi: f64 = StandardNormal.sample(rng);
        let hh = (h.los + h.sigma * hr).hypot(h.sigma * hi);
        let gg = (g.los + g.sigma * gr).hypot(g.sigma * gi);
        a += hh * gg;
    }
    a
}

pub fn sample_a(spec: &RisChannelSpec, trials: usize, seed: u64) -> Result<ChannelSamples> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    let (h, g) = spec.hops();
    let blocks = trials.div_ceil(SAMPLE_BLOCK);
    let samples: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = block_rng(seed, b as u64);
            let len = SAMPLE_BLOCK.min(trials - b * SAMPLE_BLOCK);
            (0..len).map(move |_| draw_cascade(&mut rng, &h, &g, spec.n_ris)).collect::<Vec<_>>()
        })
        .collect();
    let mean = McEstimate::from_samples(&samples, seed);
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|x| (x - mean.mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean.mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0).max(1.0);
    Ok(ChannelSamples {
        samples,
        mean,
        variance,
        variance_std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    })
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and the Gamma fit.
pub fn ks_distance(samples: &[f64], fit: &GammaFit) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = fit.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Csv,
    /// little-endian `f64`, no header
    Binary,
}

pub fn write_samples(path: &Path, samples: &[f64], format: SampleFormat) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        SampleFormat::Csv => {
            writeln!(out, "a")?;
            for x in samples {
                writeln!(out, "{x:e}")?;
            }
        }
        SampleFormat::Binary => {
            for x in samples {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()
}

/// Friis free-space link between transmitter, RIS and receiver.
///
/// `P_r = P G_t G_r λ² / (16 π² (d₁ + d₂)²)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: Option<f64>,
    pub rx_power: Option<f64>,
    pub gain_tx: f64,
    pub gain_rx: f64,
    pub wavelength: f64,
    pub d1: f64,
    pub d2: f64,
    pub noise_n0: f64,
}

impl Default for LinkBudget {
    /// 2.4 GHz carrier (λ = 0.125 m), 9.03 dBi antennas, 10 m per hop, and
    /// 0 dB received power.
    fn default() -> Self {
        LinkBudget {
            tx_power: None,
            rx_power: Some(1.0),
            gain_tx: 8.0,
            gain_rx: 8.0,
            wavelength: 0.125,
            d1: 10.0,
            d2: 10.0,
            noise_n0: 1.0,
        }
    }
}

impl LinkBudget {
    /// `G_t G_r λ² / (16 π² (d₁ + d₂)²)`
    pub fn path_gain(&self) -> f64 {
        let d = self.d1 + self.d2;
        self.gain_tx * self.gain_rx * self.wavelength * self.wavelength / (16.0 * PI * PI * d * d)
    }

    pub fn path_gain_db(&self) -> f64 {
        10.0 * self.path_gain().log10()
    }

    /// Received SNR per unit channel gain, `P_r / N₀`, for a transmit SNR
    /// `P / N₀` given in dB.
    pub fn rx_snr_from_tx_db(&self, tx_snr_db: f64) -> f64 {
        10f64.powf(tx_snr_db / 10.0) * self.path_gain()
    }

    fn validate_geometry(&self) -> Result<()> {
        for (name, v) in [
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
            ("wavelength", self.wavelength),
            ("d1", self.d1),
            ("d2", self.d2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Usage(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Fills whichever of transmit/receive power is unset.
pub fn friis(link: LinkBudget) -> Result<LinkBudget> {
    link.validate_geometry()?;
    let g = link.path_gain();
    match (link.tx_power, link.rx_power) {
        (Some(p), None) => Ok(LinkBudget {
            rx_power: Some(p * g),
            ..link
        }),
        (None, Some(pr)) => Ok(LinkBudget {
            tx_power: Some(pr / g),
            ..link
        }),
        _ => Err(Error::Usage(
            "exactly one of tx_power / rx_power must be set".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn friis_cancelling_factors() {
        let link = LinkBudget {
            tx_power: Some(1.0),
            rx_power: None,
            gain_tx: 1.0,
            gain_rx: 1.0,
            wavelength: 4.0 * PI,
            d1: 0.25,
            d2: 0.75,
            noise_n0: 1.0,
        };
        assert_relative_eq!(friis(link).unwrap().rx_power.unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn friis_default_geometry() {
        // 16π²·400 / (64 · 0.015625) = 6400 π²
        let filled = friis(LinkBudget::default()).unwrap();
        assert_relative_eq!(filled.tx_power.unwrap(), 63_165.468_166_971_895, max_relative = 1e-14);
        assert_relative_eq!(filled.tx_power.unwrap(), 6400.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn friis_round_trip() {
        let filled = friis(LinkBudget::default()).unwrap();
        let back = friis(LinkBudget {
            rx_power: None,
            ..filled
        })
        .unwrap();
        let p = back.rx_power.unwrap();
        assert!((p - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn friis_needs_exactly_one_side() {
        let both = LinkBudget {
            tx_power: Some(1.0),
            ..LinkBudget::default()
        };
        assert!(matches!(friis(both), Err(Error::Usage(_))));
        let neither = LinkBudget {
            rx_power: None,
            ..LinkBudget::default()
        };
        assert!(friis(neither).is_err());
    }

    #[test]
    fn rayleigh_product_moments() {
        let m = analytic_moments(&RisChannelSpec::new(1, 0.0, 0.0)).unwrap();
        assert_relative_eq!(m.k1, PI / 4.0, max_relative = 1e-14);
        assert_relative_eq!(m.k2, 1.0 - PI * PI / 16.0, max_relative = 1e-14);
        assert_relative_eq!(m.second_moment, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn laguerre_expressions_match_exact_moments() {
        for &(n, k1, k2) in &[(1, 0.0, 0.0), (4, 1.0, 0.5), (64, 1.0, 0.5), (16, 3.0, 7.5)] {
            let exact = analytic_moments(&RisChannelSpec::new(n, k1, k2)).unwrap();
            let printed = laguerre_moments(n, k1, k2).unwrap();
            assert_relative_eq!(exact.k1, printed.k1, max_relative = 1e-13);
            assert_relative_eq!(exact.k2, printed.k2, max_relative = 1e-12);
        }
    }

    #[test]
    fn moments_scale_linearly_in_elements() {
        let one = analytic_moments(&RisChannelSpec::new(1, 1.0, 0.5)).unwrap();
        for n in [2, 4, 64, 1000] {
            let m = analytic_moments(&RisChannelSpec::new(n, 1.0, 0.5)).unwrap();
            assert_relative_eq!(m.k1, n as f64 * one.k1, max_relative = 1e-14);
            assert_relative_eq!(m.k2, n as f64 * one.k2, max_relative = 1e-14);
        }
    }

    #[test]
    fn reference_moments_for_64_elements() {
        // mpmath with L_{1/2} = 1F1(-1/2; 1; x)
        let m = analytic_moments(&RisChannelSpec::new(64, 1.0, 0.5)).unwrap();
        assert_relative_eq!(m.k1, 89.837_423_403_459_008, max_relative = 1e-12);
        assert_relative_eq!(m.k2, 65.894_333_691_056_808, max_relative = 1e-11);
    }

    #[test]
    fn general_omega_scales_moments() {
        let base = analytic_moments(&RisChannelSpec::new(4, 1.0, 0.5).with_omega(1.0, 1.0)).unwrap();
        let scaled = analytic_moments(&RisChannelSpec::new(4, 1.0, 0.5).with_omega(4.0, 9.0)).unwrap();
        assert_relative_eq!(scaled.k1, 6.0 * base.k1, max_relative = 1e-14);
        assert_relative_eq!(scaled.k2, 36.0 * base.k2, max_relative = 1e-14);
    }

    #[test]
    fn gamma_fit_identities() {
        let fit = gamma_fit(&FadingMoments::new(1.0, 1.0)).unwrap();
        assert_eq!((fit.a, fit.b), (0.0, 1.0));
        assert_eq!(fit.pdf(0.0).unwrap(), 1.0);

        let m = FadingMoments::new(PI / 4.0, 1.0 - PI * PI / 16.0);
        let fit = gamma_fit(&m).unwrap();
        assert_relative_eq!(fit.a, 0.609_945_759_918_522_5, max_relative = 1e-13);
        assert_relative_eq!(fit.b, 0.487_841_381_337_714_4, max_relative = 1e-13);
        assert_relative_eq!(fit.mean(), m.k1, max_relative = 1e-14);
        assert_relative_eq!(fit.variance(), m.k2, max_relative = 1e-14);

        assert!(gamma_fit(&FadingMoments::new(0.0, 1.0)).is_err());
        assert!(gamma_fit(&FadingMoments::new(1.0, -1.0)).is_err());
    }

    #[test]
    fn pdf_mode_and_domain() {
        let fit = GammaFit { a: 3.0, b: 0.5 };
        let mode = fit.a * fit.b;
        let p = fit.pdf(mode).unwrap();
        assert!(p > fit.pdf(mode * 0.99).unwrap() && p > fit.pdf(mode * 1.01).unwrap());
        assert!(fit.pdf(-1.0).is_err());
        // log form stays finite far into the tail
        assert!(fit.log_pdf(1e6).unwrap().is_finite());
    }

    #[test]
    fn sampler_is_deterministic_and_unbiased() {
        let spec = RisChannelSpec::new(1, 0.0, 0.0);
        let a = sample_a(&spec, 200_000, 7).unwrap();
        let b = sample_a(&spec, 200_000, 7).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!((a.mean.mean - PI / 4.0).abs() < 4.0 * a.mean.std_error);
        let c = sample_a(&spec, 1000, 8).unwrap();
        assert_ne!(a.samples[..1000], c.samples[..]);
    }

    #[test]
    fn sampler_prefix_is_stable_under_length_change() {
        let spec = RisChannelSpec::new(4, 1.0, 0.5);
        let short = sample_a(&spec, 3000, 11).unwrap();
        let long = sample_a(&spec, 5000, 11).unwrap();
        assert_eq!(short.samples[..], long.samples[..3000]);
    }

    #[test]
    fn rician_hop_parameters_round_trip() {
        let spec = RisChannelSpec::new(2, 1.7, 0.2).with_omega(2.5, 0.4);
        let (h, g) = spec.hops();
        assert_relative_eq!(h.k_factor(), 1.7, max_relative = 1e-14);
        assert_relative_eq!(h.omega(), 2.5, max_relative = 1e-14);
        assert_relative_eq!(g.k_factor(), 0.2, max_relative = 1e-13);
        assert_relative_eq!(g.omega(), 0.4, max_relative = 1e-14);
    }

    #[test]
    fn sample_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        write_samples(&path, &[1.0, 2.5], SampleFormat::Binary).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 16);
        let path = dir.path().join("a.csv");
        write_samples(&path, &[1.0, 2.5], SampleFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
