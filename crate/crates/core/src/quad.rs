//! Adaptive Gauss–Kronrod (7/15) quadrature and expectations over a
//! unit-mean exponential fade.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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

/// Upper limit used for expectations over `h ~ Exp(1)`; the neglected tail
/// mass `e^{-28}` is below 1e-12.
pub const FADE_TAIL_CUTOFF: f64 = 28.0;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_segments: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
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
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive quadrature of `f` over `[a, b]`: the segment with the
/// largest error estimate is bisected until the total estimate meets the
/// tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::NumericFailure {
                context: "adaptive quadrature",
                achieved: f64::INFINITY,
            });
        }
        if total_err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= opts.max_segments {
            return Err(Error::NumericFailure {
                context: "adaptive quadrature",
                achieved: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point; accept what we have
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // re-sum to shed accumulated cancellation from the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, abs_error })
}

/// `∫_0^b f(h) dh` where `f(h) ~ h^{-beta}` near zero, `0 <= beta < 1`.
///
/// Substitutes `u = h^{1-beta}`, which turns the singular factor into a
/// bounded integrand.
pub fn integrate_power_singular<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    beta: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    debug_assert!((0.0..1.0).contains(&beta));
    if beta == 0.0 {
        return integrate(f, 0.0, b, opts);
    }
    let k = 1.0 - beta;
    let jac = beta / k;
    integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let h = u.powf(1.0 / k);
            f(h) * u.powf(jac) / k
        },
        0.0,
        b.powf(k),
        opts,
    )
}

/// `E[g(h)]` for `h ~ Exp(1)`, i.e. `∫_0^∞ g(h) e^{-h} dh`, truncated at
/// [`FADE_TAIL_CUTOFF`]. `singular_exponent` declares `g(h) ~ h^{-beta}`
/// near zero so the first unit interval gets the singularity substitution.
pub fn fade_expectation<G: Fn(f64) -> f64>(g: G, singular_exponent: f64) -> Result<f64> {
    fade_expectation_on(g, 0.0, FADE_TAIL_CUTOFF, singular_exponent)
}

/// `∫_lo^hi g(h) e^{-h} dh`, with the same singularity handling as
/// [`fade_expectation`] when `lo == 0`.
pub fn fade_expectation_on<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    singular_exponent: f64,
) -> Result<f64> {
    let opts = QuadOptions::default();
    let weighted = |h: f64| g(h) * (-h).exp();
    if hi <= lo {
        return Ok(0.0);
    }
    if lo > 0.0 || singular_exponent <= 0.0 {
        return Ok(integrate(weighted, lo, hi, opts)?.value);
    }
    let split = hi.min(1.0);
    let head = integrate_power_singular(&weighted, split, singular_exponent, opts)?.value;
    let tail = if hi > split {
        integrate(&weighted, split, hi, opts)?.value
    } else {
        0.0
    };
    Ok(head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn exponential_moments() {
        // E[h^2] = 2, less the tail beyond the cutoff
        let m = fade_expectation(|h| h * h, 0.0).unwrap();
        let c = FADE_TAIL_CUTOFF;
        let tail = (c * c + 2.0 * c + 2.0) * (-c).exp();
        assert!((m - (2.0 - tail)).abs() < 1e-12, "{m}");
    }

    #[test]
    fn singular_moment_recovers_gamma() {
        // E[h^{-0.75}] = Γ(0.25)
        let v = fade_expectation(|h| h.powf(-0.75), 0.75).unwrap();
        assert!((v - 3.625_609_908_221_908).abs() < 1e-10, "{v}");
    }

    #[test]
    fn reports_failure_on_divergent_integrand() {
        let opts = QuadOptions {
            max_segments: 50,
            ..QuadOptions::default()
        };
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, opts);
        assert!(matches!(r, Err(Error::NumericFailure { .. })));
    }
}
