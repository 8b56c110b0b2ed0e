//! Gamma function and the regularized incomplete Gamma functions.
//!
//! Gamma uses the Lanczos approximation (g = 7, nine coefficients) with the
//! reflection formula below 1/2. Relative error is around 1e-15 on (0, 20].
//! The incomplete functions use the power series for `x < a + 1` and the
//! Lentz continued fraction for the complement otherwise.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_TWO_PI: f64 = 0.918_938_533_204_672_8;

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Gamma function. Returns NaN at the poles (non-positive integers).
pub fn gamma(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z <= 0.0 && z == z.floor() {
        return f64::NAN;
    }
    if z < 0.5 {
        return PI / ((PI * z).sin() * gamma(1.0 - z));
    }
    if z > 171.7 {
        return f64::INFINITY;
    }
    let x = z - 1.0;
    let t = x + LANCZOS_G + 0.5;
    // split the power to stay finite near the overflow limit
    let half = t.powf(0.5 * (x + 0.5));
    SQRT_TWO_PI * half * (half * (-t).exp()) * lanczos_sum(x)
}

/// Natural log of |Γ(z)|.
pub fn ln_gamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.floor() {
        return f64::INFINITY;
    }
    if z < 0.5 {
        return (PI / (PI * z).sin()).abs().ln() - ln_gamma(1.0 - z);
    }
    let x = z - 1.0;
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_TWO_PI + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

const INC_GAMMA_EPS: f64 = 1e-16;
const INC_GAMMA_MAX_ITER: usize = 10_000;

/// `x^a e^{-x} / Γ(a)`, the common prefactor of both expansions.
fn inc_gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..INC_GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * INC_GAMMA_EPS {
            break;
        }
    }
    sum * inc_gamma_prefactor(a, x)
}

fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..INC_GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < INC_GAMMA_EPS {
            break;
        }
    }
    inc_gamma_prefactor(a, x) * h
}

/// Regularized lower incomplete Gamma `P(a, x) = γ(a, x) / Γ(a)` for `a > 0`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete Gamma `Q(a, x) = Γ(a, x) / Γ(a)` for `a > 0`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_continued_fraction(a, x)
    }
}

/// `∫_lo^hi t^{a-1} e^{-t} dt` for `a > 0`, picking whichever of the lower
/// or upper regularized forms keeps the difference well conditioned.
pub fn incomplete_gamma_between(a: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let scale = gamma(a);
    if lo >= a + 1.0 {
        scale * (gamma_q(a, lo) - gamma_q(a, hi))
    } else {
        scale * (gamma_p(a, hi) - gamma_p(a, lo))
    }
}
