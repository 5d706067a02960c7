//! Change of time variable `t = τ(s)` with `β(τ(s)) τ̇(s) = 1`, which turns
//! a time-varying coefficient in front of `∂f` into a constant one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

const ROOT_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-12;

type TimeMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `τ` as the inverse of `p(t) = ∫_{t0}^t β(r) dr`.
#[derive(Clone)]
pub struct TimeRescale {
    beta: TimeMap,
    primitive: Option<TimeMap>,
    t0: f64,
}

impl std::fmt::Debug for TimeRescale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeRescale")
            .field("t0", &self.t0)
            .field("closed_form_primitive", &self.primitive.is_some())
            .finish()
    }
}

/// Builds the rescaling for `β` on `[t0, horizon]`, checking `β > 0` on a
/// fine sample of the horizon.
pub fn time_rescale(beta: TimeMap, t0: f64, horizon: f64) -> Result<TimeRescale> {
    if !(horizon > t0) {
        return Err(Error::InvalidParameter(format!("need horizon > t0, got [{t0}, {horizon}]")));
    }
    let samples = 10_000;
    for i in 0..=samples {
        let t = t0 + (horizon - t0) * i as f64 / samples as f64;
        let b = beta(t);
        if !(b > 0.0) {
            return Err(Error::hypothesis("time rescaling", format!("beta(t) > 0 (beta({t}) = {b})")));
        }
    }
    Ok(TimeRescale {
        beta,
        primitive: None,
        t0,
    })
}

impl TimeRescale {
    /// `β(t) = γ + β/t`, whose primitive is `γ(t − t0) + β ln(t/t0)`.
    pub fn for_schedule(gamma: f64, beta: f64, t0: f64, horizon: f64) -> Result<Self> {
        let mut r = time_rescale(Arc::new(move |t| gamma + beta / t), t0, horizon)?;
        r.primitive = Some(Arc::new(move |t| gamma * (t - t0) + beta * (t / t0).ln()));
        Ok(r)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn beta(&self, t: f64) -> f64 {
        (self.beta)(t)
    }

    /// `p(t) = ∫_{t0}^t β`.
    pub fn primitive(&self, t: f64) -> Result<f64> {
        match &self.primitive {
            Some(p) => Ok(p(t)),
            None => adaptive_simpson(|r| (self.beta)(r), self.t0, t, QUAD_TOL),
        }
    }

    /// `τ(s)`, the root of `p(t) = s`.
    pub fn tau(&self, s: f64) -> Result<f64> {
        self.tau_from(s, self.t0, 0.0)
    }

    /// `τ(s)` given a known pair `p(t_prev) = s_prev` with `s_prev ≤ s`;
    /// only `∫_{t_prev}^t β` is evaluated.
    pub fn tau_from(&self, s: f64, t_prev: f64, s_prev: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::InvalidParameter(format!("rescaled time must be >= 0, got {s}")));
        }
        if s == s_prev {
            return Ok(t_prev);
        }
        let g = |t: f64| -> Result<f64> {
            let inc = match &self.primitive {
                Some(p) => p(t) - p(t_prev),
                None => adaptive_simpson(|r| (self.beta)(r), t_prev, t, QUAD_TOL)?,
            };
            Ok(s_prev + inc - s)
        };
        // bracket the root, then Newton with bisection safeguard
        let mut lo = t_prev;
        let mut step = (s - s_prev) / self.beta(t_prev).max(1e-300);
        let mut hi = t_prev + step;
        let mut ghi = g(hi)?;
        let mut guard = 0;
        while ghi < 0.0 {
            lo = hi;
            step *= 2.0;
            hi += step;
            ghi = g(hi)?;
            guard += 1;
            if guard > 200 || !hi.is_finite() {
                return Err(Error::hypothesis("time rescaling", "beta not integrable up to the requested s"));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let gt = g(t)?;
            if gt.abs() <= ROOT_TOL {
                return Ok(t);
            }
            if gt > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = t - gt / self.beta(t);
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi.abs() {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// `τ` on an increasing sequence of rescaled times, solved sequentially.
    pub fn tau_grid(&self, s_values: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(s_values.len());
        let (mut tp, mut sp) = (self.t0, 0.0);
        for &s in s_values {
            if s < sp {
                return Err(Error::InvalidParameter("rescaled times must be nondecreasing".into()));
            }
            let t = self.tau_from(s, tp, sp)?;
            out.push(t);
            tp = t;
            sp = s;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_for_unit_beta() {
        let r = time_rescale(Arc::new(|_| 1.0), 1.0, 100.0).unwrap();
        assert_eq!(r.tau(0.0).unwrap(), 1.0);
        for s in [0.5, 3.0, 42.0] {
            let t = r.tau(s).unwrap();
            assert!((t - (1.0 + s)).abs() < 1e-9, "{s} {t}");
        }
    }

    #[test]
    fn schedule_example() {
        // (τ − 1) + ln τ = 1
        let numeric = time_rescale(Arc::new(|t: f64| 1.0 + 1.0 / t), 1.0, 50.0).unwrap();
        let closed = TimeRescale::for_schedule(1.0, 1.0, 1.0, 50.0).unwrap();
        let a = numeric.tau(1.0).unwrap();
        let b = closed.tau(1.0).unwrap();
        assert!((a - 1.5571455989976).abs() < 1e-9, "{a}");
        assert!((a - b).abs() < 1e-10);
        assert_eq!(closed.tau(0.0).unwrap(), 1.0);
    }

    #[test]
    fn grid_matches_pointwise() {
        let r = TimeRescale::for_schedule(1.0, 1.0, 1.0, 50.0).unwrap();
        let s: Vec<f64> = (0..20).map(|i| i as f64 * 0.7).collect();
        let g = r.tau_grid(&s).unwrap();
        for (si, ti) in s.iter().zip(&g) {
            assert!((r.tau(*si).unwrap() - ti).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(time_rescale(Arc::new(|t: f64| 2.0 - t), 1.0, 5.0).is_err());
    }
}
