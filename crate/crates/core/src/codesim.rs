//! Random-coding Monte Carlo with maximum-likelihood decoding.
//!
//! Each trial draws a fresh BPSK codebook, a message and a channel, sends
//! `y = √snr · A · c + w` with unit-variance noise (the normalisation the
//! bound uses) and decodes by minimum Euclidean distance given `A`.

use crate::channel::{block_rng, draw_cascade, McEstimate, RisChannelSpec, SAMPLE_BLOCK};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub const MAX_BLOCKLENGTH: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    /// One `A` per codeword.
    Block,
    /// A fresh `A` per symbol; exploration only.
    PerSymbol,
    /// `A` fixed; for checks against exact error probabilities.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: u32,
    /// Codebook size; `2^{nR}` rounded to the nearest integer by
    /// [`SimConfig::from_rate`].
    pub num_codewords: u32,
    pub snr: f64,
    pub spec: RisChannelSpec,
    pub trials: u64,
    pub seed: u64,
    pub fading: FadingModel,
}

impl SimConfig {
    pub fn from_rate(n: u32, rate: f64, snr: f64, spec: RisChannelSpec, trials: u64, seed: u64) -> Result<Self> {
        let m = (n as f64 * rate).exp2().round();
        if !(m.is_finite() && m >= 1.0 && m <= u32::MAX as f64) {
            return Err(Error::Usage(format!("2^(nR) = {m} is not a usable codebook size")));
        }
        let cfg = SimConfig {
            n,
            num_codewords: m as u32,
            snr,
            spec,
            trials,
            seed,
            fading: FadingModel::Block,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rate(&self) -> f64 {
        (self.num_codewords as f64).log2() / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_BLOCKLENGTH {
            return Err(Error::Usage(format!("n = {} must lie in 1..={MAX_BLOCKLENGTH}", self.n)));
        }
        if self.num_codewords < 2 {
            return Err(Error::Usage("at least two codewords are needed".into()));
        }
        if self.num_codewords as u64 > 1u64 << self.n {
            return Err(Error::Usage(format!(
                "M = {} exceeds 2^n = {}",
                self.num_codewords,
                1u64 << self.n
            )));
        }
        if !(self.snr.is_finite() && self.snr >= 0.0) {
            return Err(Error::Usage(format!("snr = {} must be >= 0", self.snr)));
        }
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        if let FadingModel::Constant(a) = self.fading {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Usage(format!("constant amplitude {a} must be >= 0")));
            }
        }
        self.spec.validate()
    }
}

/// Block-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub estimate: McEstimate,
    pub errors: u64,
    /// One-sided 95% upper confidence limit; `3/trials` when no error was
    /// seen.
    pub upper_confidence: f64,
}

/// Codewords as bit patterns, bit `i` set meaning `-1` in position `i`.
fn symbol(word: u32, i: u32) -> f64 {
    if word >> i & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn run_trial<R: Rng>(rng: &mut R, cfg: &SimConfig, fixed: Option<&[u32]>, book: &mut Vec<u32>, amps: &mut [f64]) -> bool {
    let n = cfg.n;
    let m = cfg.num_codewords as usize;
    let mask = (1u32 << n) - 1;
    let words: &[u32] = match fixed {
        Some(w) => w,
        None => {
            book.clear();
            book.extend((0..m).map(|_| rng.gen::<u32>() & mask));
            book
        }
    };
    let sent = rng.gen_range(0..m);
    let (h, g) = cfg.spec.hops();
    match cfg.fading {
        FadingModel::Block => amps.fill(draw_cascade(rng, &h, &g, cfg.spec.n_ris)),
        FadingModel::PerSymbol => amps.iter_mut().for_each(|a| *a = draw_cascade(rng, &h, &g, cfg.spec.n_ris)),
        FadingModel::Constant(a) => amps.fill(a),
    }
    let gain = cfg.snr.sqrt();
    // matched-filter output a_i y_i; every codeword has the same energy
    let z: Vec<f64> = (0..n)
        .map(|i| {
            let w: f64 = rng.sample(StandardNormal);
            let a = amps[i as usize];
            a * (gain * a * symbol(words[sent], i) + w)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0u32;
    let mut choice = 0usize;
    for (k, &word) in words.iter().enumerate() {
        let metric: f64 = z.iter().enumerate().map(|(i, zi)| zi * symbol(word, i as u32)).sum();
        if metric > best {
            best = metric;
            ties = 1;
            choice = k;
        } else if metric == best {
            // uniform choice among maximisers
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                choice = k;
            }
        }
    }
    choice != sent
}

fn simulate(cfg: &SimConfig, fixed: Option<&[u32]>) -> Result<SimOutcome> {
    cfg.validate()?;
    let trials = cfg.trials;
    let block = SAMPLE_BLOCK as u64;
    let blocks = trials.div_ceil(block);
    let errors: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(cfg.seed, b);
            let mut book = Vec::with_capacity(cfg.num_codewords as usize);
            let mut amps = vec![0.0; cfg.n as usize];
            let len = block.min(trials - b * block);
            (0..len)
                .filter(|_| run_trial(&mut rng, cfg, fixed, &mut book, &mut amps))
                .count() as u64
        })
        .sum();
    let t = trials as f64;
    let p = errors as f64 / t;
    let se = if trials > 1 {
        (p * (1.0 - p) / (t - 1.0)).sqrt()
    } else {
        0.0
    };
    let upper_confidence = if errors == 0 { 3.0 / t } else { (p + 1.645 * se).min(1.0) };
    Ok(SimOutcome {
        estimate: McEstimate {
            mean: p,
            std_error: se,
            trials,
            seed: cfg.seed,
        },
        errors,
        upper_confidence,
    })
}

/// Block-error rate of random BPSK codes under ML decoding.
pub fn simulate_ml_error(cfg: &SimConfig) -> Result<SimOutcome> {
    simulate(cfg, None)
}

/// As [`simulate_ml_error`] with one fixed codebook (bit patterns).
pub fn simulate_fixed_codebook(cfg: &SimConfig, codebook: &[u32]) -> Result<SimOutcome> {
    if codebook.len() != cfg.num_codewords as usize {
        return Err(Error::Usage(format!(
            "codebook has {} words, config expects {}",
            codebook.len(),
            cfg.num_codewords
        )));
    }
    if codebook.iter().any(|w| w >> cfg.n != 0) {
        return Err(Error::Usage(format!("codewords must fit in {} bits", cfg.n)));
    }
    simulate(cfg, Some(codebook))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gaussian_q;

    fn cfg(n: u32, m: u32, snr: f64, trials: u64, fading: FadingModel) -> SimConfig {
        SimConfig {
            n,
            num_codewords: m,
            snr,
            spec: RisChannelSpec::new(4, 1.0, 0.5),
            trials,
            seed: 11,
            fading,
        }
    }

    fn within(out: &SimOutcome, want: f64, sigmas: f64) {
        let se = (want * (1.0 - want) / out.estimate.trials as f64).sqrt();
        assert!((out.estimate.mean - want).abs() <= sigmas * se, "{} vs {want}", out.estimate.mean);
    }

    #[test]
    fn fixed_pair_matches_pairwise_error() {
        // antipodal pair at distance d = 2√2: P_e = Q(A √snr d / 2)
        let c = cfg(2, 2, 2.0, 200_000, FadingModel::Constant(1.0));
        let out = simulate_fixed_codebook(&c, &[0b00, 0b11]).unwrap();
        within(&out, gaussian_q((2.0f64 * 2.0).sqrt()), 4.0);
        // identical words: a fair coin
        let out = simulate_fixed_codebook(&c, &[0b01, 0b01]).unwrap();
        within(&out, 0.5, 4.0);
    }

    #[test]
    fn random_pair_matches_enumeration() {
        let snr: f64 = 1.5;
        let want = 0.25 * 0.5 + 0.5 * gaussian_q(snr.sqrt()) + 0.25 * gaussian_q((2.0 * snr).sqrt());
        let out = simulate_ml_error(&cfg(2, 2, snr, 200_000, FadingModel::Constant(1.0))).unwrap();
        within(&out, want, 4.0);
    }

    #[test]
    fn zero_snr_guesses() {
        let out = simulate_ml_error(&cfg(8, 16, 0.0, 50_000, FadingModel::Block)).unwrap();
        within(&out, 15.0 / 16.0, 4.0);
    }

    #[test]
    fn zero_errors_report_upper_limit() {
        let out = simulate_fixed_codebook(&cfg(4, 2, 1e4, 1000, FadingModel::Constant(1.0)), &[0, 0b1111]).unwrap();
        assert_eq!(out.errors, 0);
        assert_eq!(out.estimate.mean, 0.0);
        assert!((out.upper_confidence - 3e-3).abs() < 1e-15);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = cfg(8, 16, 1e-4, 20_000, FadingModel::Block);
        assert_eq!(simulate_ml_error(&c).unwrap(), simulate_ml_error(&c).unwrap());
        let other = SimConfig { seed: 12, ..c };
        assert_ne!(simulate_ml_error(&c).unwrap().errors, simulate_ml_error(&other).unwrap().errors);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SimConfig::from_rate(8, 0.5, 1.0, RisChannelSpec::new(4, 1.0, 0.5), 10, 0).is_ok());
        assert!(SimConfig::from_rate(21, 0.5, 1.0, RisChannelSpec::new(4, 1.0, 0.5), 10, 0).is_err());
        assert!(SimConfig::from_rate(4, 0.1, 1.0, RisChannelSpec::new(4, 1.0, 0.5), 10, 0).is_err());
        assert!(cfg(2, 5, 1.0, 10, FadingModel::Block).validate().is_err());
        assert!(simulate_fixed_codebook(&cfg(2, 2, 1.0, 10, FadingModel::Block), &[0, 4]).is_err());
        assert_eq!(SimConfig::from_rate(8, 0.5, 1.0, RisChannelSpec::new(4, 1.0, 0.5), 10, 0).unwrap().num_codewords, 16);
    }
}
