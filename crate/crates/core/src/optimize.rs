//! Bracketed golden-section minimization on a compact interval.

use crate::error::{GosaError, Result};
use crate::scalar::Real;

const SCAN_POINTS: usize = 64;
const MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub x: T,
    pub value: T,
    pub evaluations: usize,
}

/// Minimizes `f` over `[lo, hi]` to absolute tolerance `tol` in `x`.
///
/// A uniform scan of the interval locates the best cell, which brackets the
/// golden-section refinement. For unimodal objectives the result is the
/// global minimizer; minima on the boundary are returned as is.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    tol: T,
) -> Result<Minimum<T>> {
    let fail = |reason: &str, evaluations| GosaError::Optimization {
        reason: reason.to_string(),
        lo: lo.as_f64(),
        hi: hi.as_f64(),
        evaluations,
    };
    if !(lo.is_finite() && hi.is_finite()) || hi < lo || !(tol > T::zero()) {
        return Err(fail("invalid search interval or tolerance", 0));
    }
    if hi - lo <= tol {
        let x = (lo + hi) * T::lit(0.5);
        let value = f(x);
        if !value.is_finite() {
            return Err(fail("objective not finite", 1));
        }
        return Ok(Minimum { x, value, evaluations: 1 });
    }

    let step = (hi - lo) / T::from_count(SCAN_POINTS);
    let mut evaluations = 0;
    let mut best: Option<(usize, T)> = None;
    for i in 0..=SCAN_POINTS {
        let x = if i == SCAN_POINTS { hi } else { lo + step * T::from_count(i) };
        let v = f(x);
        evaluations += 1;
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    let (ibest, vbest) = best.ok_or_else(|| fail("objective not finite anywhere on the scan", evaluations))?;

    let node = |i: usize| if i >= SCAN_POINTS { hi } else { lo + step * T::from_count(i) };
    let mut a = node(ibest.saturating_sub(1));
    let mut b = node((ibest + 1).min(SCAN_POINTS));

    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    evaluations += 2;
    let mut iters = 0;
    while (b - a) > tol {
        iters += 1;
        if iters > MAX_ITERS {
            return Err(fail("golden section did not reach tolerance", evaluations));
        }
        // NaN compares false and pushes the bracket towards the finite side.
        if fc < fd || !fd.is_finite() {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }
    let x = (a + b) * T::lit(0.5);
    let fx = f(x);
    evaluations += 1;
    let (x, value) = if fx.is_finite() && fx <= vbest { (x, fx) } else { (node(ibest), vbest) };
    Ok(Minimum { x, value, evaluations })
}
