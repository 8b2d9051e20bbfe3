//! Safeguarded Newton iteration for strictly decreasing scalar functions.

use crate::error::{RdError, Result};

/// Extra bisection steps allowed once the Newton budget is spent.
const BISECTION_BUDGET: usize = 200;

/// Finds the root of a strictly decreasing `f` inside `[lo, hi]`, given
/// `f(lo) > 0 >= f(hi)`. `f` returns the value and the derivative.
///
/// `x0` may sit on either end of the bracket. Newton steps that leave the
/// current bracket fall back to bisection, so the
/// iterate never escapes. Returns early once `|f(x)| <= tol` or the bracket
/// has shrunk to a few ulps.
pub(crate) fn newton_decreasing<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    newton_steps: usize,
    what: &'static str,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = if x0 >= lo && x0 <= hi {
        x0
    } else {
        0.5 * (lo + hi)
    };
    let mut last = f64::NAN;
    for step in 0..newton_steps + BISECTION_BUDGET {
        let (fx, dfx) = f(x);
        last = fx;
        if !fx.is_finite() {
            break;
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        x = if step < newton_steps && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(RdError::RootNotConverged {
        what,
        steps: newton_steps + BISECTION_BUDGET,
        residual: last,
    })
}
