//! Rate fitting and numerical versions of the appendix lemmas.

use crate::error::{Error, Result};
use crate::lyapunov::{EnergyTrace, ScVariant};
use crate::objectives::{Objective, Point};
use crate::perturbations::PerturbationSignal;
use crate::quadrature::cumulative_trapezoid;
use crate::trajectory::Trajectory;

/// Samples below this are clamped before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

pub const FAST_SLOPE: f64 = -1.8;
pub const STAGNANT_SLOPE: f64 = -0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateClass {
    Fast,
    Degraded,
    Stagnant,
}

impl RateClass {
    pub fn from_slope(slope: f64) -> Self {
        if slope <= FAST_SLOPE {
            RateClass::Fast
        } else if slope > STAGNANT_SLOPE {
            RateClass::Stagnant
        } else {
            RateClass::Degraded
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateClass::Fast => "fast",
            RateClass::Degraded => "degraded",
            RateClass::Stagnant => "stagnant",
        }
    }
}

/// Least-squares power law `v ≈ e^{intercept} t^{slope}` on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub samples: usize,
    pub classification: RateClass,
}

/// Ordinary least squares of `log v` against `log t` over samples with
/// `t ∈ [lo, hi]`. Values down to `−1e-12·max|v|` count as round-off and
/// are clamped to [`LOG_FLOOR`]; anything more negative is an error.
pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateReport> {
    let (lo, hi) = window;
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::InvalidParameter(format!("rate window must satisfy 0 < lo < hi, got {lo}:{hi}")));
    }
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
    if idx.len() < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            found: idx.len(),
        });
    }
    let scale = idx.iter().map(|&i| values[i].abs()).fold(0.0, f64::max);
    let mut pts = Vec::with_capacity(idx.len());
    for &i in &idx {
        let v = values[i];
        if v < -1e-12 * scale || !v.is_finite() {
            return Err(Error::NonPositiveValue { t: times[i], value: v });
        }
        pts.push((times[i].ln(), v.max(LOG_FLOOR).ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateReport {
        window,
        slope,
        intercept,
        residual_rms,
        samples: pts.len(),
        classification: RateClass::from_slope(slope),
    })
}

/// Number of log-spaced points used by [`fit_rate_log_resampled`].
pub const LOG_RESAMPLE_POINTS: usize = 200;

/// [`fit_rate`] after linear interpolation onto 200 log-spaced times, so
/// each decade of the window carries equal weight. `window = None` uses
/// `[T/5, T]`. The window must still hold 10 original samples.
pub fn fit_rate_log_resampled(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<RateReport> {
    let t_end = *times.last().ok_or(Error::TooFewSamples { needed: 10, found: 0 })?;
    let (lo, hi) = window.unwrap_or((t_end / 5.0, t_end));
    let lo = lo.max(times[0]);
    let hi = hi.min(t_end);
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::InvalidParameter(format!("rate window must satisfy 0 < lo < hi, got {lo}:{hi}")));
    }
    let inside = times.iter().filter(|&&t| t >= lo && t <= hi).count();
    if inside < 10 {
        return Err(Error::TooFewSamples {
            needed: 10,
            found: inside,
        });
    }
    let m = LOG_RESAMPLE_POINTS;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let ts: Vec<f64> = (0..m)
        .map(|k| {
            if k + 1 == m {
                hi
            } else {
                (llo + (lhi - llo) * k as f64 / (m - 1) as f64).exp()
            }
        })
        .collect();
    let vs: Vec<f64> = ts.iter().map(|&t| interpolate(times, values, t)).collect();
    fit_rate(&ts, &vs, (lo, hi))
}

/// Piecewise-linear interpolation on an increasing grid, clamped at the ends.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.partition_point(|&s| s < t) {
        0 => values[0],
        j if j >= times.len() => values[times.len() - 1],
        j => {
            let (t0, t1) = (times[j - 1], times[j]);
            let w = (t - t0) / (t1 - t0);
            values[j - 1] * (1.0 - w) + values[j] * w
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GronwallOutcome {
    /// Hypothesis and conclusion hold; `min_slack = min(c + ∫m − |w|)`.
    Holds { min_slack: f64 },
    /// Hypothesis holds but the conclusion does not.
    ConclusionFails { min_slack: f64, index: usize },
    /// `½w² ≤ ½c² + ∫ m w` fails on the samples; nothing is concluded.
    HypothesisNotSatisfied { index: usize, excess: f64 },
}

impl GronwallOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, GronwallOutcome::Holds { .. })
    }
}

/// Checks `½w(t)² ≤ ½c² + ∫_{t0}^t m w` on the samples and, if it holds,
/// whether `|w(t)| ≤ c + ∫_{t0}^t m + 1e-8` everywhere.
pub fn gronwall_verify(times: &[f64], w: &[f64], m: &[f64], c: f64) -> Result<GronwallOutcome> {
    if times.len() != w.len() || times.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: w.len().min(m.len()),
        });
    }
    if times.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    if m.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("m must be nonnegative".into()));
    }
    let mw: Vec<f64> = m.iter().zip(w).map(|(a, b)| a * b).collect();
    let int_mw = cumulative_trapezoid(times, &mw);
    let int_m = cumulative_trapezoid(times, m);
    for i in 0..times.len() {
        let lhs = 0.5 * w[i] * w[i];
        let rhs = 0.5 * c * c + int_mw[i];
        if lhs > rhs + 1e-10 * rhs.abs().max(1.0) {
            return Ok(GronwallOutcome::HypothesisNotSatisfied {
                index: i,
                excess: lhs - rhs,
            });
        }
    }
    let mut min_slack = f64::INFINITY;
    let mut worst = 0;
    for i in 0..times.len() {
        let s = c + int_m[i] - w[i].abs();
        if s < min_slack {
            min_slack = s;
            worst = i;
        }
    }
    Ok(if min_slack >= -1e-8 {
        GronwallOutcome::Holds { min_slack }
    } else {
        GronwallOutcome::ConclusionFails {
            min_slack,
            index: worst,
        }
    })
}

/// Grid size for [`kronecker_mean`].
pub const KRONECKER_POINTS: usize = 20_001;

/// `(1/φ(t)) ∫_{t0}^t φ(s) f(s) ds` by the trapezoid rule.
pub fn kronecker_mean(f: impl Fn(f64) -> f64, phi: impl Fn(f64) -> f64, t0: f64, t: f64) -> Result<f64> {
    if !(t > t0) {
        return Err(Error::InvalidParameter(format!("need t > t0, got {t0}, {t}")));
    }
    let n = KRONECKER_POINTS;
    let h = (t - t0) / (n - 1) as f64;
    let mut acc = 0.0;
    let mut prev_phi = f64::NAN;
    let mut prev = 0.0;
    for k in 0..n {
        let s = if k + 1 == n { t } else { t0 + k as f64 * h };
        let p = phi(s);
        if !(p > 0.0) {
            return Err(Error::hypothesis("kronecker mean", format!("phi > 0 (phi({s}) = {p})")));
        }
        if k > 0 && p < prev_phi {
            return Err(Error::hypothesis("kronecker mean", "phi nondecreasing"));
        }
        let v = p * f(s);
        if k > 0 {
            acc += 0.5 * h * (prev + v);
        }
        prev = v;
        prev_phi = p;
    }
    Ok(acc / prev_phi)
}

/// Pointwise comparison of a strongly convex energy with its exponential
/// envelope.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub bound: Vec<f64>,
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub m_constant: f64,
}

/// `𝓔(t) ≤ 𝓔(t0)e^{−r(t−t0)} + M ∫_{t0}^t e^{−r(t−τ)} ‖g(τ)‖ dτ`,
/// `r = √μ/2`, checked at every sample with tolerance `1e-6·𝓔(t0)`.
///
/// Explicit: `g = e + βė`, `M = √(2𝓔(t0)) + ∫‖g‖`. Implicit: `g = e`,
/// `M = √(𝓔(t0)/c) + ∫‖e‖/(2c)`, `c = min(μ,1)/(4 max(β²L², 1))`. The
/// integrals inside `M` run to the trace horizon, which can only tighten
/// the bound.
pub fn sc_bound_check(
    trace: &EnergyTrace,
    obj: &Objective,
    signal: &PerturbationSignal,
    beta: f64,
    variant: ScVariant,
) -> Result<BoundReport> {
    let mu = obj.mu();
    if !(mu > 0.0) {
        return Err(Error::hypothesis("sc bound", "mu > 0"));
    }
    let times = &trace.times;
    if times.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    let r = mu.sqrt() / 2.0;
    let e0 = trace.values[0];
    let norms: Vec<f64> = match variant {
        ScVariant::Explicit => times.iter().map(|&t| signal.g_norm(beta, t)).collect(),
        ScVariant::Implicit => times.iter().map(|&t| signal.norm(t)).collect(),
    };
    let total = *cumulative_trapezoid(times, &norms).last().unwrap();
    let m_constant = match variant {
        ScVariant::Explicit => (2.0 * e0).max(0.0).sqrt() + total,
        ScVariant::Implicit => {
            let l = obj
                .lipschitz_grad()
                .ok_or_else(|| Error::hypothesis("sc bound (implicit)", "gradient Lipschitz constant known"))?;
            let c = mu.min(1.0) / (4.0 * (beta * beta * l * l).max(1.0));
            (e0.max(0.0) / c).sqrt() + total / (2.0 * c)
        }
    };
    let tolerance = 1e-6 * e0.abs();
    let mut weighted = 0.0;
    let mut bound = Vec::with_capacity(times.len());
    let mut slack = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            let decay = (-r * (times[i] - times[i - 1])).exp();
            weighted = decay * weighted + 0.5 * (times[i] - times[i - 1]) * (decay * norms[i - 1] + norms[i]);
        }
        let b = e0 * (-r * (times[i] - times[0])).exp() + m_constant * weighted;
        bound.push(b);
        slack.push(b - trace.values[i]);
    }
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        holds: min_slack >= -tolerance,
        bound,
        slack,
        min_slack,
        tolerance,
        m_constant,
    })
}

/// Largest excess of `d𝓔/dt + (√μ/2)𝓔 − ‖v‖‖g‖` over the samples for the
/// explicit strongly convex energy, `v = √μ(x − x*) + ẋ + β∇f(x)`, with
/// centered differences for `d𝓔/dt`.
pub fn sc_differential_excess(
    trace: &EnergyTrace,
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    beta: f64,
) -> Result<f64> {
    let mu = obj.mu();
    if !(mu > 0.0) {
        return Err(Error::hypothesis("sc differential inequality", "mu > 0"));
    }
    let xstar: &Point = obj.known_minimizer().ok_or(Error::UnknownMinimum)?;
    let n = trace.times.len();
    if n < 3 || traj.len() != n {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    let s = mu.sqrt();
    let mut worst = f64::NEG_INFINITY;
    for i in 1..n - 1 {
        let t = trace.times[i];
        let de = (trace.values[i + 1] - trace.values[i - 1]) / (trace.times[i + 1] - trace.times[i - 1]);
        let v = s * (&traj.x[i] - xstar) + &traj.velocity[i] + beta * obj.gradient(&traj.x[i])?;
        let rhs = v.norm() * signal.g_norm(beta, t);
        worst = worst.max(de + 0.5 * s * trace.values[i] - rhs);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::uniform_grid;

    #[test]
    fn power_law_is_exact() {
        let t = uniform_grid(10.0, 50.0, 400);
        let v: Vec<f64> = t.iter().map(|s| s.powi(-2)).collect();
        let r = fit_rate(&t, &v, (10.0, 50.0)).unwrap();
        assert!((r.slope + 2.0).abs() < 1e-10);
        assert!(r.residual_rms < 1e-10);
        assert_eq!(r.classification, RateClass::Fast);
    }

    #[test]
    fn constant_has_zero_slope() {
        let t = uniform_grid(1.0, 50.0, 100);
        let v = vec![3.0; t.len()];
        let r = fit_rate(&t, &v, (1.0, 50.0)).unwrap();
        assert!(r.slope.abs() < 1e-12);
        assert_eq!(r.classification, RateClass::Stagnant);
    }

    #[test]
    fn modulated_power_law() {
        let t = uniform_grid(10.0, 1000.0, 20000);
        let v: Vec<f64> = t.iter().map(|s| s.powf(-0.2) * (2.0 + s.cos())).collect();
        let r = fit_rate(&t, &v, (10.0, 1000.0)).unwrap();
        assert!((r.slope + 0.2).abs() < 0.1, "{}", r.slope);
        assert_eq!(r.classification, RateClass::Degraded);
        let r = fit_rate_log_resampled(&t, &v, Some((10.0, 1000.0))).unwrap();
        assert!((r.slope + 0.2).abs() < 0.1, "{}", r.slope);
    }

    #[test]
    fn fit_rate_errors() {
        let t = uniform_grid(1.0, 2.0, 5);
        let v = vec![1.0; 5];
        assert!(matches!(fit_rate(&t, &v, (1.0, 2.0)), Err(Error::TooFewSamples { .. })));
        let t = uniform_grid(1.0, 2.0, 20);
        let mut v = vec![1.0; 20];
        v[3] = -0.5;
        assert!(matches!(fit_rate(&t, &v, (1.0, 2.0)), Err(Error::NonPositiveValue { .. })));
    }

    #[test]
    fn gronwall_cases() {
        let t = uniform_grid(0.0, 5.0, 501);
        let zero = vec![0.0; t.len()];
        let ones = vec![1.0; t.len()];
        assert_eq!(
            gronwall_verify(&t, &zero, &ones, 0.0).unwrap(),
            GronwallOutcome::Holds { min_slack: 0.0 }
        );
        let w: Vec<f64> = t.to_vec();
        match gronwall_verify(&t, &w, &ones, 0.0).unwrap() {
            GronwallOutcome::Holds { min_slack } => assert!(min_slack.abs() <= 1e-10),
            other => panic!("{other:?}"),
        }
        let w2: Vec<f64> = t.iter().map(|s| 2.0 * s).collect();
        assert!(matches!(
            gronwall_verify(&t, &w2, &ones, 0.0).unwrap(),
            GronwallOutcome::HypothesisNotSatisfied { .. }
        ));
    }

    #[test]
    fn kronecker_examples() {
        for t in [10.0, 100.0] {
            let k = kronecker_mean(|s| s.powi(-2), |s| s * s, 1.0, t).unwrap();
            assert!((k - (t - 1.0) / (t * t)).abs() < 1e-8);
        }
        assert_eq!(kronecker_mean(|_| 0.0, |s| s, 1.0, 5.0).unwrap(), 0.0);
        let k40 = kronecker_mean(|s| s.powi(-2), |s| (s / 2.0).exp(), 1.0, 40.0).unwrap();
        let k41 = kronecker_mean(|s| s.powi(-2), |s| (s / 2.0).exp(), 1.0, 41.0).unwrap();
        assert!(k40 <= 1e-2 && k41 < k40);
        assert!(kronecker_mean(|s| s, |s| 1.0 - s, 1.0, 3.0).is_err());
    }

    #[test]
    fn interpolation() {
        let t = [1.0, 2.0, 4.0];
        let v = [1.0, 3.0, 7.0];
        assert_eq!(interpolate(&t, &v, 0.5), 1.0);
        assert_eq!(interpolate(&t, &v, 1.5), 2.0);
        assert_eq!(interpolate(&t, &v, 3.0), 5.0);
        assert_eq!(interpolate(&t, &v, 9.0), 7.0);
    }
}
