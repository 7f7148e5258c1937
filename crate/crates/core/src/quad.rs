//! Quadrature: globally adaptive Gauss–Kronrod (7/15) for the oracles, and
//! first-kind Gauss–Chebyshev nodes for the accelerated bound.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

// QUADPACK qk15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Number of equal panels the range is split into before adapting.
    pub initial_panels: usize,
    /// Points in the peak-finding scan of [`integrate_log`].
    pub scan_points: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 2000,
            initial_panels: 8,
            scan_points: 64,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }

    pub fn with_scan(mut self, points: usize) -> Self {
        self.scan_points = points.max(2);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    fv[7] = f(c);
    let mut kron = WGK[7] * fv[7];
    let mut gauss = WG[3] * fv[7];
    let mut resabs = WGK[7] * fv[7].abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (lo, hi) = (f(c - dx), f(c + dx));
        fv[j] = lo;
        fv[14 - j] = hi;
        kron += WGK[j] * (lo + hi);
        resabs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    // QUADPACK error scaling with its roundoff floor
    let mean = 0.5 * kron;
    let mut resasc = WGK[7] * (fv[7] - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let (resabs, resasc) = (resabs * h.abs(), resasc * h.abs());
    let mut err = ((kron - gauss) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (kron * h, err)
}

/// Globally adaptive Gauss–Kronrod on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", "interval endpoints must be finite"));
    }
    let mut heap = BinaryHeap::new();
    let panels = opts.initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let (value, error) = kronrod15(&mut f, lo, hi);
        total += value;
        total_err += error;
        heap.push(Segment { a: lo, b: hi, value, error });
    }
    let mut evals = 15 * panels;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Accuracy {
                estimate: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            return Err(Error::Accuracy {
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(Error::Accuracy {
                estimate: total,
                error: total_err,
            });
        }
    }
    // re-sum to shed accumulated rounding from the running updates
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult { value, error, evals })
}

/// Integral over `[a, ∞)` through `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = 1.0 - t;
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// `ln ∫ₐᵇ exp(g(x)) dx` for a log-integrand `g`.
///
/// The integrand is rescaled by an estimate of its maximum: a coarse scan,
/// a golden-section refinement around the best scan point, and a retry with
/// the largest value met during integration if the first pass overflows.
pub fn integrate_log<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, opts: &QuadOptions) -> Result<(f64, QuadResult)> {
    let scan = opts.scan_points.max(2);
    let mut shift = f64::NEG_INFINITY;
    let mut best = 0;
    let mut values = vec![f64::NEG_INFINITY; scan + 1];
    for (i, slot) in values.iter_mut().enumerate() {
        let x = a + (b - a) * i as f64 / scan as f64;
        let v = clean_eval(&mut g, x);
        *slot = v;
        if v > shift && v < f64::INFINITY {
            shift = v;
            best = i;
        }
    }
    let step = (b - a) / scan as f64;
    let (mut lo, mut hi) = (a + step * (best as f64 - 1.0).max(0.0), a + step * (best as f64 + 1.0).min(scan as f64));
    let neighbour = values[best.saturating_sub(1)].max(values[(best + 1).min(scan)]);
    let unresolved = shift == f64::NEG_INFINITY || neighbour < shift - 20.0 || best == 0 || best == scan;
    if shift == f64::NEG_INFINITY {
        (lo, hi) = (a, b);
    }
    let mut width = f64::INFINITY;
    if unresolved {
        // golden-section refinement, assuming a single peak in the bracket
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..48 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            let (v1, v2) = (clean_eval(&mut g, x1), clean_eval(&mut g, x2));
            for v in [v1, v2] {
                if v < f64::INFINITY {
                    shift = shift.max(v);
                }
            }
            if v1 < v2 {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        let peak = 0.5 * (lo + hi);
        let h = 1e-3 * step;
        let d2 = (clean_eval(&mut g, peak + h) - 2.0 * clean_eval(&mut g, peak) + clean_eval(&mut g, peak - h)) / (h * h);
        if d2 < 0.0 && d2.is_finite() {
            width = 1.0 / (-d2).sqrt();
        }
    }
    if shift == f64::NEG_INFINITY {
        return Ok((
            f64::NEG_INFINITY,
            QuadResult {
                value: 0.0,
                error: 0.0,
                evals: scan + 1,
            },
        ));
    }
    // a peak much narrower than the scan spacing gets its own piece
    let peak = 0.5 * (lo + hi);
    let mut breaks = vec![a];
    if width < 0.25 * step {
        for x in [peak - 40.0 * width, peak + 40.0 * width] {
            if x > a && x < b {
                breaks.push(x);
            }
        }
    }
    breaks.push(b);
    for _ in 0..4 {
        let mut seen = shift;
        let res = integrate_pieces(
            |x| {
                let v = g(x);
                if v.is_nan() {
                    return 0.0;
                }
                if v > seen {
                    seen = v;
                }
                (v - shift).exp()
            },
            &breaks,
            peak,
            opts,
        );
        match res {
            Ok(res) if res.value.is_finite() && seen <= shift + 600.0 => return Ok((shift + res.value.ln(), res)),
            Ok(_) | Err(Error::Accuracy { .. }) if seen > shift => shift = seen,
            Ok(res) => return Ok((shift + res.value.ln(), res)),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Accuracy {
        estimate: f64::INFINITY,
        error: f64::INFINITY,
    })
}

fn clean_eval<G: FnMut(f64) -> f64>(g: &mut G, x: f64) -> f64 {
    let v = g(x);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Sums [`integrate`] over consecutive pieces, the one holding `peak` first
/// so the others can stop at an absolute tolerance relative to it.
fn integrate_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], peak: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if breaks.len() == 2 {
        return integrate(f, breaks[0], breaks[1], opts);
    }
    let centre = breaks.windows(2).position(|w| peak <= w[1]).unwrap_or(0);
    let main = integrate(&mut f, breaks[centre], breaks[centre + 1], opts)?;
    let mut total = main;
    let tail_opts = QuadOptions {
        abs_tol: opts.abs_tol.max(0.1 * opts.rel_tol * main.value.abs()),
        ..*opts
    };
    for (i, w) in breaks.windows(2).enumerate() {
        if i != centre {
            let r = integrate(&mut f, w[0], w[1], &tail_opts)?;
            total.value += r.value;
            total.error += r.error;
            total.evals += r.evals;
        }
    }
    Ok(total)
}

/// First-kind Gauss–Chebyshev rule on `[-1, 1]`: nodes `cos((2i-1)π/(2K))`
/// and the common weight `π/K`, for `i = 1..=K`.
pub fn gauss_chebyshev(k: usize) -> Vec<(f64, f64)> {
    let w = std::f64::consts::PI / k as f64;
    (1..=k)
        .map(|i| (((2 * i - 1) as f64 * std::f64::consts::PI / (2 * k) as f64).cos(), w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_for_low_degree_polynomials() {
        let r = integrate(|x| 3.0 * x.powi(4) - x + 2.0, -1.0, 2.0, &QuadOptions::default().with_panels(1)).unwrap();
        // 3/5 (32 + 1) - (4 - 1)/2 + 6
        assert_relative_eq!(r.value, 19.8 - 1.5 + 6.0, max_relative = 1e-14);
    }

    #[test]
    fn smooth_and_peaked_integrands() {
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, &QuadOptions::rel(1e-13)).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-13);
        let r = integrate(|x| (-(x * x) * 1e4).exp(), -1.0, 1.0, &QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt() / 100.0, max_relative = 1e-11);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, &QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, &QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::FRAC_PI_2, max_relative = 1e-11);
    }

    #[test]
    fn log_integrand_beyond_float_range() {
        // ∫₀¹ e^{1000 x} dx = (e^{1000} - 1)/1000
        let (ln, _) = integrate_log(|x| 1000.0 * x, 0.0, 1.0, &QuadOptions::rel(1e-12)).unwrap();
        assert_relative_eq!(ln, 1000.0 - 1000f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn chebyshev_rule() {
        // ∫ f(x)/sqrt(1-x²) is exact for polynomials of degree < 2K
        let rule = gauss_chebyshev(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(s, 5.0 * std::f64::consts::PI / 16.0, max_relative = 1e-14);
        assert_eq!(rule.len(), 8);
    }

    #[test]
    fn reports_failure() {
        let opts = QuadOptions {
            max_intervals: 4,
            ..QuadOptions::rel(1e-14)
        };
        assert!(matches!(
            integrate(|x| x.abs().sqrt().recip(), -1.0, 1.0, &opts),
            Err(Error::Accuracy { .. })
        ));
    }
}
