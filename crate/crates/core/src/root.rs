//! Bracketing and bisection for monotone scalar functions.

use crate::error::{Error, Result};

pub const MAX_DOUBLINGS: usize = 200;

/// Finds `q >= 0` with `f(q) = target` for a non-increasing `f`.
///
/// The upper end of the bracket starts at `initial_upper` and doubles until
/// `f(upper) < target`; bisection then runs until the bracket is narrower
/// than `abs_tol` (or a few ulps of the root, whichever is larger), and the
/// midpoint of the final bracket is returned.
pub fn solve_non_increasing<F: Fn(f64) -> Result<f64>>(
    f: F,
    target: f64,
    initial_upper: f64,
    abs_tol: f64,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = initial_upper.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while f(hi)? >= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NumericFailure {
                context: "bisection bracketing",
                achieved: hi,
            });
        }
    }
    while hi - lo > abs_tol.max(4.0 * f64::EPSILON * hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
