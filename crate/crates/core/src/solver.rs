//! Bracketed bisection for monotone scalar equations.
//!
//! Every transmission limit in the crate (one-shot caps, tail thresholds, the
//! common value-to-cost threshold of the cross-state optimum) is the root of a
//! monotone function, so a plain deterministic bisection is all that is needed.

use crate::error::{Error, Result};

/// Stopping rule for [`solve_root`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Absolute bracket width at which to stop. `0.0` bisects until the
    /// bracket cannot be split in floating point.
    pub arg: f64,
    /// Absolute residual `|f(x) - target|` at which to stop.
    pub residual: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            arg: 1e-12,
            residual: 1e-12,
            max_iter: 2000,
        }
    }
}

impl Tolerance {
    /// Residual-driven stopping: bisect until `|f(x) - target| <= residual`
    /// or the bracket has collapsed to adjacent floats.
    pub fn residual_only(residual: f64) -> Self {
        Self {
            arg: 0.0,
            residual,
            max_iter: 2000,
        }
    }
}

/// Find `x` in `[lo, hi]` with `f(x) = target` for a monotone `f`.
///
/// Works for increasing and decreasing `f`. Fails with [`Error::Solver`] when
/// `target` is not between `f(lo)` and `f(hi)`.
pub fn solve_root<F>(f: F, target: f64, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let f_lo = f(lo) - target;
    let f_hi = f(hi) - target;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Solver {
            target,
            lo,
            hi,
            lo_value: f_lo + target,
            hi_value: f_hi + target,
        });
    }
    let increasing = f_lo < 0.0;
    let mut best = if f_lo.abs() < f_hi.abs() { lo } else { hi };
    let mut best_res = f_lo.abs().min(f_hi.abs());
    for _ in 0..tol.max_iter {
        if hi - lo <= tol.arg {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = f(mid) - target;
        if r.abs() < best_res {
            best = mid;
            best_res = r.abs();
        }
        if r.abs() <= tol.residual || r == 0.0 {
            return Ok(mid);
        }
        if (r < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if tol.arg > 0.0 && hi - lo <= tol.arg {
        Ok(lo + 0.5 * (hi - lo))
    } else {
        Ok(best)
    }
}
