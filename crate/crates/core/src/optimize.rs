//! Small derivative-free 1-D routines shared by the model and the fits.

use crate::error::{invalid, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Outcome of a bounded 1-D minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `tol` (absolute, in `x`) or after
/// `max_iter` contractions. The bracket end points are not evaluated; use
/// [`minimize_scan`] when the minimum may sit on a bound.
pub fn golden_section(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;

    while (b - a).abs() > tol && iterations < max_iter {
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
        iterations += 1;
    }

    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Minimum {
        x,
        value,
        iterations,
        converged: (b - a).abs() <= tol,
    }
}

/// Coarse grid scan over `[lo, hi]` followed by golden-section refinement in
/// the cell around the best grid point. Bounds are included as candidates, so
/// a minimum pinned to either end is returned exactly.
pub fn minimize_scan(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let grid = grid.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..grid {
        let v = f(lo + step * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let refined = golden_section(&f, a, b, tol, max_iter);
    let at_grid = lo + step * best_i as f64;
    if refined.value <= best_v {
        refined
    } else {
        Minimum {
            x: at_grid,
            value: best_v,
            ..refined
        }
    }
}

/// Bisection root of a continuous, monotone `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must differ in sign. Terminates when the bracket is
/// below `rel_tol * |hi|` or after 400 halvings.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(invalid("bisection bracket does not straddle a root"));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_err: f64,
    pub slope_err: f64,
}

/// Closed-form weighted least squares for a line; `sigma` are per-point
/// standard deviations of `y`. Standard errors come from the normal matrix.
pub fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(invalid("length mismatch in weighted line fit"));
    }
    if x.len() < 2 {
        return Err(invalid("need at least two points for a line fit"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        if !(si > 0.0) {
            return Err(invalid("non-positive sigma in weighted line fit"));
        }
        let w = 1.0 / (si * si);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = s * sxx - sx * sx;
    if det.abs() <= f64::EPSILON * s * sxx {
        return Err(invalid("degenerate abscissae in weighted line fit"));
    }
    Ok(LineFit {
        intercept: (sxx * sy - sx * sxy) / det,
        slope: (s * sxy - sx * sy) / det,
        intercept_err: (sxx / det).sqrt(),
        slope_err: (s / det).sqrt(),
    })
}

/// Weighted mean with its standard error.
pub fn weighted_mean(y: &[f64], sigma: &[f64]) -> Result<(f64, f64)> {
    if y.len() != sigma.len() || y.is_empty() {
        return Err(invalid("weighted mean needs equal, non-empty inputs"));
    }
    let mut sw = 0.0;
    let mut swy = 0.0;
    for (&yi, &si) in y.iter().zip(sigma) {
        if !(si > 0.0) {
            return Err(invalid("non-positive sigma in weighted mean"));
        }
        let w = 1.0 / (si * si);
        sw += w;
        swy += w * yi;
    }
    Ok((swy / sw, (1.0 / sw).sqrt()))
}
