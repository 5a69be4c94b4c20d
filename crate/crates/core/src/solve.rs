//! Scalar bracketing solvers: bisection for monotone root finding and
//! golden-section for unimodal minimization.

use crate::error::{Error, Result};

/// Maximum bisection steps. A bracket of width 1 shrinks below 1e-16 in
/// 54 steps; the budget only trips for unreachable tolerances.
const MAX_BISECT_ITER: usize = 200;

/// Finds `s` in `[lo, hi]` with `f(s) = target`, assuming `f` is
/// nondecreasing, by plain bisection down to bracket width `tol`.
pub fn bisect_increasing<F>(f: F, lo: f64, hi: f64, target: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("bisection tol must be > 0, got {tol}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    if f(lo) > target {
        return Ok(lo);
    }
    if f(hi) < target {
        return Ok(hi);
    }
    let mut iter = 0;
    while hi - lo > tol {
        if iter >= MAX_BISECT_ITER {
            return Err(Error::Convergence(format!(
                "bisection bracket stuck at width {:.3e} after {iter} iterations (tol {tol:.3e})",
                hi - lo
            )));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket narrower than fp spacing
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
    }
    Ok(0.5 * (lo + hi))
}

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMin {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
///
/// Returns the best point *seen* (not the interval midpoint), so a noisy
/// objective floor near the minimum cannot push the result uphill. The
/// iteration count is fixed: 90 steps shrink the interval by ~1e-19, which
/// drives multiplicative parameters to machine precision.
pub fn golden_min<F>(mut f: F, lo: f64, hi: f64, iterations: usize) -> ScalarMin
where
    F: FnMut(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 <= f2 {
        ScalarMin { x: x1, value: f1 }
    } else {
        ScalarMin { x: x2, value: f2 }
    };
    for _ in 0..iterations {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        let (xc, fc) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fc < best.value {
            best = ScalarMin { x: xc, value: fc };
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    best
}

/// Golden-section over `log(x)` on `[lo, hi]`, with a coarse log-spaced
/// pre-scan so a locally non-unimodal objective still lands in the right
/// basin. Suits multiplicative parameters.
pub fn golden_min_log<F>(mut f: F, lo: f64, hi: f64) -> ScalarMin
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.ln(), hi.ln());
    const SCAN: usize = 33;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    let scan_x = |i: usize| llo + (lhi - llo) * i as f64 / (SCAN - 1) as f64;
    for i in 0..SCAN {
        let v = f(scan_x(i).exp());
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = scan_x(best_i.saturating_sub(1));
    let b = scan_x((best_i + 1).min(SCAN - 1));
    let inner = golden_min(|lx| f(lx.exp()), a, b, 90);
    let refined = ScalarMin { x: inner.x.exp(), value: inner.value };
    if refined.value <= best_v {
        refined
    } else {
        ScalarMin { x: scan_x(best_i).exp(), value: best_v }
    }
}
