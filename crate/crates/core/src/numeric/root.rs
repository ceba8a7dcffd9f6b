//! Bracketed inversion of monotone increasing functions.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("could not bracket target {target} inside ({lo}, {hi})")]
    Bracket { target: f64, lo: f64, hi: f64 },
    #[error("function not finite at {x} while inverting")]
    NonFinite { x: f64 },
}

/// Relative width at which bisection stops.
pub const BISECTION_REL_WIDTH: f64 = 1e-12;
const MAX_EXPANSIONS: usize = 2100;

/// Bisect `f(x) = target` on `[lo, hi]` where `f` is increasing and
/// `f(lo) <= target <= f(hi)`.
pub fn bisect<F: Fn(f64) -> Option<f64>>(f: &F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hi - lo <= BISECTION_REL_WIDTH * lo.abs().max(hi.abs()) {
            break;
        }
        match f(mid) {
            Some(v) if v < target => lo = mid,
            Some(_) => hi = mid,
            // treat undefined points like overshoot towards the nearer end
            None => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

/// Find `x` in the open interval `(lo, hi)` with `f(x) = target` for an
/// increasing `f`, expanding a bracket geometrically from `reference`.
///
/// Towards an infinite end the step doubles; towards a finite end the gap to
/// the endpoint halves.
pub fn invert_monotone<F: Fn(f64) -> Option<f64>>(
    f: &F,
    target: f64,
    reference: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, RootError> {
    let bracket_err = || RootError::Bracket { target, lo, hi };
    let f_ref = f(reference).ok_or(RootError::NonFinite { x: reference })?;
    if f_ref == target {
        return Ok(reference);
    }
    let upward = f_ref < target;
    let mut inner = reference;
    let mut step = 1.0_f64.max(reference.abs() * 0.5);
    for k in 1..=MAX_EXPANSIONS {
        let outer = if upward {
            if hi.is_finite() {
                hi - (hi - reference) * 0.5_f64.powi(k as i32)
            } else {
                reference + step
            }
        } else if lo.is_finite() {
            lo + (reference - lo) * 0.5_f64.powi(k as i32)
        } else {
            reference - step
        };
        if !outer.is_finite() || outer <= lo || outer >= hi || outer == inner {
            return Err(bracket_err());
        }
        step *= 2.0;
        let Some(v) = f(outer) else {
            return Err(bracket_err());
        };
        let crossed = if upward { v >= target } else { v <= target };
        if crossed {
            let (a, b) = if upward { (inner, outer) } else { (outer, inner) };
            return Ok(bisect(f, target, a, b));
        }
        inner = outer;
    }
    Err(bracket_err())
}
