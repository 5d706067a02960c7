//! Adaptive Simpson quadrature and trapezoid accumulators on sample grids.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Relative floor on the local Simpson tolerance. An absolute tolerance
/// alone cannot be met once the integral is much larger than one.
pub const REL_FLOOR: f64 = 1e-12;

/// `∫_a^b f` by adaptive Simpson with interval bisection.
///
/// The interval is first cut into unit-length pieces so that oscillatory
/// integrands with period around one are never sampled too coarsely at the
/// top level; the absolute tolerance is shared in proportion to length and
/// floored at [`REL_FLOOR`] relative to each piece.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if b == a {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, abs_tol).map(|v| -v);
    }
    let pieces = ((b - a).ceil() as usize).max(1);
    let width = (b - a) / pieces as f64;
    let breaks: Vec<f64> = (0..=pieces)
        .map(|k| if k == pieces { b } else { a + k as f64 * width })
        .collect();
    adaptive_simpson_pieces(f, &breaks, abs_tol)
}

/// As [`adaptive_simpson`] over the consecutive pieces of an increasing
/// list of breakpoints, e.g. the kinks of a non-smooth integrand.
pub fn adaptive_simpson_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64) -> Result<f64> {
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    let (a, b) = (breaks[0], breaks[breaks.len() - 1]);
    if breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::QuadratureNonConvergence { a, b });
    }
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi == lo {
            continue;
        }
        let tol = abs_tol * (hi - lo) / (b - a);
        let fa = f(lo);
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(&f, lo, hi, fa, fm, fb, whole, tol, MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::QuadratureNonConvergence { a, b });
    }
    if delta.abs() <= 15.0 * tol.max(REL_FLOOR * (left + right).abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureNonConvergence { a, b });
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Running trapezoid integral `out[i] = ∫_{t_0}^{t_i}` over a sample grid.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Backward trapezoid tail `out[i] = ∫_{t_i}^{t_last}`; `out[last] = 0`.
pub fn tail_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    debug_assert_eq!(times.len(), values.len());
    let n = times.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * (times[i + 1] - times[i]) * (values[i] + values[i + 1]);
    }
    out
}
