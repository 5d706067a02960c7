//! Forward–backward splittings of the two first-order differential
//! inclusions: the affine drift is stepped forward, `∂f` backward through
//! the proximal map.

use crate::dynamics::{beta_schedule, u_dot_explicit, SystemKind, SystemSpec};
use crate::error::{Error, Result};
use crate::integrators::rescale::TimeRescale;
use crate::integrators::rk::OutputGrid;
use crate::objectives::{Objective, Point};
use crate::perturbations::PerturbationSignal;
use crate::trajectory::{nearest_indices, StateForm, Trajectory};

/// Fixed step and output sampling of a proximal run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxOptions {
    pub h: f64,
    pub output: OutputGrid,
}

impl Default for ProxOptions {
    fn default() -> Self {
        ProxOptions {
            h: 1e-3,
            output: OutputGrid::Adaptive,
        }
    }
}

struct Steps {
    times: Vec<f64>,
    x: Vec<Point>,
    y: Vec<Point>,
    xi: Vec<Point>,
}

impl Steps {
    fn with_capacity(n: usize) -> Self {
        Steps {
            times: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            xi: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, x: Point, y: Point, xi: Point) {
        self.times.push(t);
        self.x.push(x);
        self.y.push(y);
        self.xi.push(xi);
    }

    /// Keeps the steps nearest to the requested output times.
    fn sample(self, output: &OutputGrid) -> Result<Steps> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        let Some(grid) = output.resolve(t0, t1)? else {
            return Ok(self);
        };
        let idx = nearest_indices(&self.times, &grid);
        let pick = |v: &Vec<Point>| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        Ok(Steps {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            x: pick(&self.x),
            y: pick(&self.y),
            xi: pick(&self.xi),
        })
    }
}

fn check_span(spec: &SystemSpec, t_span: (f64, f64), h: f64) -> Result<usize> {
    let (t0, t1) = t_span;
    if (t0 - spec.t0).abs() > 1e-12 * t0.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!("span starts at {t0}, system at {}", spec.t0)));
    }
    if !(t1 > t0) || !(h > 0.0) {
        return Err(Error::InvalidParameter("need T > t0 and h > 0".into()));
    }
    Ok(((t1 - t0) / h).round().max(1.0) as usize)
}

/// Explicit inclusion, `x` stepped through `prox_{βh f}`. Each stored
/// `xi[i]` lies in `∂f(x[i])`; `xi[0]` is the minimal-norm subgradient.
pub fn integrate_prox_explicit(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_span: (f64, f64),
    init: (&Point, &Point),
    opts: &ProxOptions,
) -> Result<Trajectory> {
    if spec.kind != SystemKind::IsehdInclusion {
        return Err(Error::InvalidParameter(format!(
            "explicit prox scheme needs ISEHD_INCLUSION, got {}",
            spec.kind.as_str()
        )));
    }
    let (a, b) = (spec.alpha, spec.beta);
    if !(b > 0.0) {
        return Err(Error::hypothesis(spec.kind.as_str(), "beta > 0"));
    }
    let h = opts.h;
    let steps = check_span(spec, t_span, h)?;
    let (t0, t1) = t_span;
    let h = (t1 - t0) / steps as f64;

    let mut x = init.0.clone();
    let mut y = init.1.clone();
    let mut out = Steps::with_capacity(steps + 1);
    out.push(t0, x.clone(), y.clone(), obj.min_norm_subgradient(&x)?);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let e = signal.eval(t)?;
        let z = &x + h * ((1.0 / b - a / t) * &x - &y / b - b * e);
        let x_new = obj.prox(&z, b * h)?;
        let xi = (&z - &x_new) / (b * h);
        y += h * ((1.0 / b - a / t + a * b / (t * t)) * &x - &y / b);
        x = x_new;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + h });
        }
        let tn = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        out.push(tn, x.clone(), y.clone(), xi);
    }
    let s = out.sample(&opts.output)?;
    let velocity = s
        .times
        .iter()
        .zip(s.x.iter().zip(&s.y))
        .zip(&s.xi)
        .map(|((&t, (x, y)), xi)| Ok(u_dot_explicit(spec, signal, t, x, y)? - b * xi))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::assemble(
        spec.clone(),
        StateForm::Auxiliary,
        s.times,
        s.x,
        s.y,
        velocity,
        Some(s.xi),
        obj,
        None,
    )
}

/// Implicit inclusion with constant `β(t) ≡ γ`: `y` through `prox_{γh f}`,
/// `x` forward. Here `xi[i] ∈ ∂f(y[i])`, the point where the implicit
/// system evaluates the subdifferential.
pub fn integrate_prox_implicit(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_span: (f64, f64),
    init: (&Point, &Point),
    opts: &ProxOptions,
) -> Result<Trajectory> {
    check_implicit_kind(spec)?;
    if !(spec.gamma > 0.0) {
        return Err(Error::hypothesis(spec.kind.as_str(), "gamma > 0"));
    }
    if spec.beta != 0.0 {
        return Err(Error::InvalidParameter(
            "time-varying beta(t) = gamma + beta/t needs integrate_prox_implicit_rescaled".into(),
        ));
    }
    let steps = check_span(spec, t_span, opts.h)?;
    let (t0, t1) = t_span;
    let h = (t1 - t0) / steps as f64;
    let g = spec.gamma;
    let times: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t1 } else { t0 + k as f64 * h })
        .collect();
    implicit_loop(spec, obj, signal, init, &times, g * h, opts)
}

/// Implicit inclusion with `β(t) = γ + β/t`, integrated in the rescaled
/// time `s` where the coefficient of `∂f` is one. `h_s = opts.h` is the
/// step in `s`; the corresponding step in `t` is `h_s/β(t)`.
pub fn integrate_prox_implicit_rescaled(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_span: (f64, f64),
    init: (&Point, &Point),
    opts: &ProxOptions,
) -> Result<Trajectory> {
    check_implicit_kind(spec)?;
    let (t0, t1) = t_span;
    check_span(spec, t_span, opts.h)?;
    let r = TimeRescale::for_schedule(spec.gamma, spec.beta, t0, t1)?;
    let s_end = r.primitive(t1)?;
    let steps = (s_end / opts.h).ceil().max(1.0) as usize;
    let hs = s_end / steps as f64;
    let s_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * hs).collect();
    let mut times = r.tau_grid(&s_grid)?;
    *times.last_mut().unwrap() = t1;
    implicit_loop(spec, obj, signal, init, &times, hs, opts)
}

fn check_implicit_kind(spec: &SystemSpec) -> Result<()> {
    if spec.kind != SystemKind::IsihdInclusion {
        return Err(Error::InvalidParameter(format!(
            "implicit prox scheme needs ISIHD_INCLUSION, got {}",
            spec.kind.as_str()
        )));
    }
    Ok(())
}

/// One loop for both implicit variants, written in the rescaled variable:
/// `y' + ∂f(y) + e + (1/β²)(1 − αβ/t + β̇)(x − y) ∋ 0`, `x' = (y − x)/β²`.
fn implicit_loop(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    init: (&Point, &Point),
    times: &[f64],
    hs: f64,
    opts: &ProxOptions,
) -> Result<Trajectory> {
    let a = spec.alpha;
    let mut x = init.0.clone();
    let mut y = init.1.clone();
    let mut out = Steps::with_capacity(times.len());
    out.push(times[0], x.clone(), y.clone(), obj.min_norm_subgradient(&y)?);
    for k in 0..times.len() - 1 {
        let t = times[k];
        let (bt, bdot) = beta_schedule(spec, t)?;
        let e = signal.eval(t)?;
        let coupling = (1.0 - a * bt / t + bdot) / (bt * bt);
        let z = &y - hs * (e + coupling * (&x - &y));
        let y_new = obj.prox(&z, hs)?;
        let xi = (&z - &y_new) / hs;
        x += (hs / (bt * bt)) * (&y - &x);
        y = y_new;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: times[k + 1] });
        }
        out.push(times[k + 1], x.clone(), y.clone(), xi);
    }
    let s = out.sample(&opts.output)?;
    let velocity = s
        .times
        .iter()
        .zip(s.x.iter().zip(&s.y))
        .map(|(&t, (x, y))| Ok((y - x) / beta_schedule(spec, t)?.0))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::assemble(
        spec.clone(),
        StateForm::Auxiliary,
        s.times,
        s.x,
        s.y,
        velocity,
        Some(s.xi),
        obj,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lift_initial;

    fn p(v: &[f64]) -> Point {
        Point::from_row_slice(v)
    }

    #[test]
    fn explicit_equilibrium_is_fixed() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let spec = SystemSpec::isehd(3.1, 1.0).with_kind(SystemKind::IsehdInclusion);
        let xs = p(&[1.0, 5.0]);
        let (x0, y0) = lift_initial(&spec, &q, &z, &xs, &p(&[0.0, 0.0])).unwrap();
        let tr = integrate_prox_explicit(&spec, &q, &z, (1.0, 5.0), (&x0, &y0), &ProxOptions::default()).unwrap();
        let dev = |tr: &Trajectory| tr.x.iter().map(|x| (x - &xs).norm()).fold(0.0, f64::max);
        // Euler on y lags the lifted rest state y*(t) = (1 − αβ/t)x* by
        // O(h), so x drifts by O(h) instead of staying put
        let d1 = dev(&tr);
        let opts = ProxOptions {
            h: 5e-4,
            ..ProxOptions::default()
        };
        let d2 = dev(&integrate_prox_explicit(&spec, &q, &z, (1.0, 5.0), (&x0, &y0), &opts).unwrap());
        assert!(d1 < 2e-3, "{d1}");
        assert!((1.6..2.6).contains(&(d1 / d2)), "{d1} {d2}");
    }

    #[test]
    fn implicit_equilibrium_is_fixed() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let xs = p(&[1.0, 5.0]);
        let mut spec = SystemSpec::isihd(3.1, 1.0, 0.0).with_kind(SystemKind::IsihdInclusion);
        let tr = integrate_prox_implicit(&spec, &q, &z, (1.0, 5.0), (&xs, &xs), &ProxOptions::default()).unwrap();
        assert!(tr.x.iter().all(|x| (x - &xs).norm() < 1e-9));
        spec.beta = 1.0;
        assert!(integrate_prox_implicit(&spec, &q, &z, (1.0, 5.0), (&xs, &xs), &ProxOptions::default()).is_err());
        let tr =
            integrate_prox_implicit_rescaled(&spec, &q, &z, (1.0, 5.0), (&xs, &xs), &ProxOptions::default()).unwrap();
        assert!(tr.x.iter().all(|x| (x - &xs).norm() < 1e-9));
        assert_eq!(*tr.times.last().unwrap(), 5.0);
    }

    #[test]
    fn rescaled_matches_constant_when_beta_is_zero() {
        let q = Objective::quartic_l1(0.1);
        let sig = PerturbationSignal::cosine_decay(1.1, 2).unwrap();
        let spec = SystemSpec::isihd(3.1, 1.0, 0.0).with_kind(SystemKind::IsihdInclusion);
        let x0 = p(&[-10.0, 20.0]);
        let y0 = p(&[0.0, 10.0]);
        let opts = ProxOptions::default();
        let a = integrate_prox_implicit(&spec, &q, &sig, (1.0, 3.0), (&x0, &y0), &opts).unwrap();
        let b = integrate_prox_implicit_rescaled(&spec, &q, &sig, (1.0, 3.0), (&x0, &y0), &opts).unwrap();
        assert_eq!(a.len(), b.len());
        let gap = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        // only the root-finding tolerance of τ separates the two
        assert!(gap < 1e-6, "{gap}");
    }

    #[test]
    fn explicit_subgradients_are_valid() {
        let q = Objective::quartic_l1(0.1);
        let sig = PerturbationSignal::cosine_decay(3.1, 2).unwrap();
        let spec = SystemSpec::isehd(3.1, 1.0).with_kind(SystemKind::IsehdInclusion);
        let (x0, y0) = lift_initial(&spec, &q, &sig, &p(&[-10.0, 20.0]), &p(&[5.0, -5.0])).unwrap();
        let opts = ProxOptions {
            h: 1e-3,
            output: OutputGrid::Uniform { n: 200 },
        };
        let tr = integrate_prox_explicit(&spec, &q, &sig, (1.0, 10.0), (&x0, &y0), &opts).unwrap();
        assert!(tr.len() <= 200 && tr.len() > 190);
        let xi = tr.xi.as_ref().unwrap();
        for (x, g) in tr.x.iter().zip(xi) {
            let fx = q.value(x).unwrap();
            for z in [p(&[0.0, 0.0]), p(&[1.0, 5.0]), p(&[-3.0, 2.0])] {
                let fz = q.value(&z).unwrap();
                assert!(fz >= fx + g.dot(&(&z - x)) - 1e-8);
            }
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let xs = p(&[1.0, 5.0]);
        let spec = SystemSpec::isehd(3.1, 1.0);
        assert!(integrate_prox_explicit(&spec, &q, &z, (1.0, 2.0), (&xs, &xs), &ProxOptions::default()).is_err());
        assert!(integrate_prox_implicit(&spec, &q, &z, (1.0, 2.0), (&xs, &xs), &ProxOptions::default()).is_err());
    }
}
