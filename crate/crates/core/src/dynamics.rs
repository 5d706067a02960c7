//! Right-hand sides of the perturbed inertial systems, their first-order
//! reformulations and the initial-data lifting between the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Objective, Point};
use crate::perturbations::PerturbationSignal;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SystemKind {
    Isehd,
    Isihd,
    HbExplicit,
    HbImplicit,
    IsehdInclusion,
    IsihdInclusion,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Isehd => "ISEHD",
            SystemKind::Isihd => "ISIHD",
            SystemKind::HbExplicit => "HB_EXPLICIT",
            SystemKind::HbImplicit => "HB_IMPLICIT",
            SystemKind::IsehdInclusion => "ISEHD_INCLUSION",
            SystemKind::IsihdInclusion => "ISIHD_INCLUSION",
        }
    }

    /// Explicit Hessian damping family (uses `∇²f ẋ` or its first-order
    /// surrogate).
    pub fn is_explicit(self) -> bool {
        matches!(
            self,
            SystemKind::Isehd | SystemKind::HbExplicit | SystemKind::IsehdInclusion
        )
    }

    pub fn is_inclusion(self) -> bool {
        matches!(self, SystemKind::IsehdInclusion | SystemKind::IsihdInclusion)
    }

    pub fn is_heavy_ball(self) -> bool {
        matches!(self, SystemKind::HbExplicit | SystemKind::HbImplicit)
    }
}

fn default_t0() -> f64 {
    1.0
}

/// Which system to integrate and its damping parameters.
///
/// `alpha` is the numerator of the viscous damping `α/t`, `beta` the Hessian
/// damping coefficient (or the `β/t` part of `β(t) = γ + β/t` for the
/// implicit family) and `gamma` the constant part of `β(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
}

impl SystemSpec {
    pub fn new(kind: SystemKind, alpha: f64, beta: f64, gamma: f64, t0: f64) -> Result<Self> {
        let spec = SystemSpec {
            kind,
            alpha,
            beta,
            gamma,
            t0,
        };
        spec.check_ranges()?;
        Ok(spec)
    }

    pub fn isehd(alpha: f64, beta: f64) -> Self {
        SystemSpec {
            kind: SystemKind::Isehd,
            alpha,
            beta,
            gamma: 0.0,
            t0: 1.0,
        }
    }

    pub fn isihd(alpha: f64, gamma: f64, beta: f64) -> Self {
        SystemSpec {
            kind: SystemKind::Isihd,
            alpha,
            beta,
            gamma,
            t0: 1.0,
        }
    }

    pub fn heavy_ball(kind: SystemKind, beta: f64) -> Self {
        SystemSpec {
            kind,
            alpha: 0.0,
            beta,
            gamma: 0.0,
            t0: 1.0,
        }
    }

    pub fn with_kind(mut self, kind: SystemKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn check_ranges(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("t0 must be > 0, got {}", self.t0)));
        }
        Ok(())
    }

    /// Checks the system against an objective. Returns warnings for
    /// tolerated departures from the theory (heavy-ball `β > 1/(2√μ)`).
    pub fn validate(&self, obj: &Objective) -> Result<Vec<String>> {
        self.check_ranges()?;
        let mut warnings = Vec::new();
        match self.kind {
            SystemKind::Isehd => {
                if !obj.is_smooth() {
                    return Err(Error::hypothesis(self.kind.as_str(), "f differentiable (use ISEHD_INCLUSION)"));
                }
            }
            SystemKind::HbExplicit => {
                if !obj.has_hessian() {
                    return Err(Error::HessianUnavailable(obj.name().to_string()));
                }
            }
            SystemKind::IsehdInclusion => {
                if !(self.beta > 0.0) {
                    return Err(Error::hypothesis(self.kind.as_str(), "beta > 0"));
                }
            }
            SystemKind::Isihd | SystemKind::IsihdInclusion => {
                if self.kind == SystemKind::Isihd && !obj.is_smooth() {
                    return Err(Error::hypothesis(self.kind.as_str(), "f differentiable (use ISIHD_INCLUSION)"));
                }
                if !(self.gamma > 0.0 || self.beta > 0.0) {
                    return Err(Error::hypothesis(self.kind.as_str(), "beta(t) = gamma + beta/t > 0"));
                }
            }
            SystemKind::HbImplicit => {}
        }
        if self.kind.is_heavy_ball() {
            let mu = obj.mu();
            if !(mu > 0.0) {
                return Err(Error::hypothesis(self.kind.as_str(), "mu > 0"));
            }
            let limit = 1.0 / (2.0 * mu.sqrt());
            if self.beta > limit {
                warnings.push(format!(
                    "{}: beta = {} exceeds 1/(2 sqrt(mu)) = {limit}; exponential bounds not guaranteed",
                    self.kind.as_str(),
                    self.beta
                ));
            }
        }
        Ok(warnings)
    }
}

/// `(β(t), β̇(t)) = (γ + β/t, −β/t²)`.
pub fn beta_schedule(spec: &SystemSpec, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("beta schedule needs t > 0, got {t}")));
    }
    Ok((spec.gamma + spec.beta / t, -spec.beta / (t * t)))
}

fn check_time(spec: &SystemSpec, t: f64) -> Result<()> {
    if t < spec.t0 || !t.is_finite() {
        return Err(Error::OutOfDomain { t, t_min: spec.t0 });
    }
    Ok(())
}

fn positive_beta_t(spec: &SystemSpec, t: f64) -> Result<(f64, f64)> {
    let (bt, bdot) = beta_schedule(spec, t)?;
    if !(bt > 0.0) {
        return Err(Error::hypothesis(spec.kind.as_str(), format!("beta(t) > 0 at t = {t}")));
    }
    Ok((bt, bdot))
}

fn sqrt_mu(spec: &SystemSpec, obj: &Objective) -> Result<f64> {
    let mu = obj.mu();
    if !(mu > 0.0) {
        return Err(Error::hypothesis(spec.kind.as_str(), "mu > 0"));
    }
    Ok(mu.sqrt())
}

/// `(ẋ, v̇)` of the second-order system in the state `(x, v = ẋ)`.
pub fn second_order_rhs(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t: f64,
    x: &Point,
    v: &Point,
) -> Result<(Point, Point)> {
    check_time(spec, t)?;
    let e = signal.eval(t)?;
    let dv = match spec.kind {
        SystemKind::Isehd | SystemKind::IsehdInclusion => {
            let hv = obj.hessian_vector(x, v)?;
            let edot = signal.eval_derivative(t)?;
            -(spec.alpha / t) * v - spec.beta * (hv + edot) - obj.gradient(x)? - e
        }
        SystemKind::Isihd | SystemKind::IsihdInclusion => {
            let (bt, _) = beta_schedule(spec, t)?;
            -(spec.alpha / t) * v - obj.gradient(&(x + bt * v))? - e
        }
        SystemKind::HbExplicit => {
            let s = sqrt_mu(spec, obj)?;
            let hv = obj.hessian_vector(x, v)?;
            let edot = signal.eval_derivative(t)?;
            -2.0 * s * v - spec.beta * hv - spec.beta * edot - obj.gradient(x)? - e
        }
        SystemKind::HbImplicit => {
            let s = sqrt_mu(spec, obj)?;
            -2.0 * s * v - obj.gradient(&(x + spec.beta * v))? - e
        }
    };
    Ok((v.clone(), dv))
}

/// `(ẋ, ẏ)` of the first-order reformulation in the state `(x, y)`.
/// Inclusion kinds use their smooth counterpart.
pub fn first_order_rhs(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<(Point, Point)> {
    check_time(spec, t)?;
    let a = spec.alpha;
    match spec.kind {
        SystemKind::Isehd | SystemKind::IsehdInclusion => {
            let b = spec.beta;
            if !(b > 0.0) {
                return Err(Error::hypothesis(spec.kind.as_str(), "beta > 0 for the first-order form"));
            }
            let e = signal.eval(t)?;
            let dx = -b * (obj.gradient(x)? + e) + (1.0 / b - a / t) * x - y / b;
            let dy = (1.0 / b - a / t + a * b / (t * t)) * x - y / b;
            Ok((dx, dy))
        }
        SystemKind::Isihd | SystemKind::IsihdInclusion => {
            let (bt, bdot) = positive_beta_t(spec, t)?;
            let e = signal.eval(t)?;
            let dx = (y - x) / bt;
            let dy = -bt * (obj.gradient(y)? + e) - ((1.0 - a * bt / t + bdot) / bt) * (x - y);
            Ok((dx, dy))
        }
        SystemKind::HbExplicit | SystemKind::HbImplicit => Err(Error::InvalidParameter(format!(
            "{} has no first-order reformulation",
            spec.kind.as_str()
        ))),
    }
}

/// Maps second-order initial data `(x₀, ẋ₀)` at `t0` to `(x₀, y₀)`.
pub fn lift_initial(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    x0: &Point,
    v0: &Point,
) -> Result<(Point, Point)> {
    let t0 = spec.t0;
    let a = spec.alpha;
    match spec.kind {
        SystemKind::Isehd | SystemKind::IsehdInclusion => {
            let b = spec.beta;
            if !(b > 0.0) {
                return Err(Error::hypothesis(spec.kind.as_str(), "beta > 0 for the first-order form"));
            }
            let g = obj.min_norm_subgradient(x0)?;
            let e = signal.eval(t0)?;
            let y0 = -b * (v0 + b * g) + (1.0 - b * a / t0) * x0 - b * b * e;
            Ok((x0.clone(), y0))
        }
        SystemKind::Isihd | SystemKind::IsihdInclusion => {
            let (bt, _) = positive_beta_t(spec, t0)?;
            Ok((x0.clone(), x0 + bt * v0))
        }
        SystemKind::HbExplicit | SystemKind::HbImplicit => Err(Error::InvalidParameter(format!(
            "{} has no first-order reformulation",
            spec.kind.as_str()
        ))),
    }
}

/// `ẋ` recovered from a first-order state `(x, y)` of a smooth run.
pub fn velocity_from_first_order(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t: f64,
    x: &Point,
    y: &Point,
) -> Result<Point> {
    match spec.kind {
        SystemKind::Isihd | SystemKind::IsihdInclusion => {
            let (bt, _) = positive_beta_t(spec, t)?;
            Ok((y - x) / bt)
        }
        _ => Ok(first_order_rhs(spec, obj, signal, t, x, y)?.0),
    }
}

/// `u̇ = ẋ + βξ` of the explicit inclusion, which needs no subgradient:
/// `u̇ = −βe(t) + (1/β − α/t)x − y/β`.
pub fn u_dot_explicit(spec: &SystemSpec, signal: &PerturbationSignal, t: f64, x: &Point, y: &Point) -> Result<Point> {
    let b = spec.beta;
    if !(b > 0.0) {
        return Err(Error::hypothesis(spec.kind.as_str(), "beta > 0"));
    }
    Ok(-b * signal.eval(t)? + (1.0 / b - spec.alpha / t) * x - y / b)
}

/// Largest interior defect of the second-order equation along a trajectory
/// sampled on a uniform grid, with all time derivatives by central
/// differences.
pub fn second_order_residual(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    traj: &Trajectory,
) -> Result<f64> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    let t = &traj.times;
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
        return Err(Error::InvalidParameter("second_order_residual needs a uniform grid".into()));
    }
    let x = &traj.x;
    let explicit = spec.kind.is_explicit();
    // ∇f(x) + e on every sample, needed for the explicit d/dt term
    let big_g: Vec<Point> = if explicit {
        x.iter()
            .zip(t)
            .map(|(p, &ti)| Ok(obj.gradient(p)? + signal.eval(ti)?))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let ti = t[i];
        let xdd = (&x[i + 1] - 2.0 * &x[i] + &x[i - 1]) / (h * h);
        let xd = (&x[i + 1] - &x[i - 1]) / (2.0 * h);
        let damping = if spec.kind.is_heavy_ball() {
            2.0 * sqrt_mu(spec, obj)?
        } else {
            spec.alpha / ti
        };
        let r = if explicit {
            let dg = (&big_g[i + 1] - &big_g[i - 1]) / (2.0 * h);
            xdd + damping * xd + spec.beta * dg + &big_g[i]
        } else {
            let bt = if spec.kind.is_heavy_ball() {
                spec.beta
            } else {
                beta_schedule(spec, ti)?.0
            };
            let grad = obj.gradient(&(&x[i] + bt * &xd))?;
            xdd + damping * &xd + grad + signal.eval(ti)?
        };
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// `[a; b]` as one state vector.
pub fn stack(a: &Point, b: &Point) -> Point {
    let n = a.len();
    Point::from_fn(n + b.len(), |i, _| if i < n { a[i] } else { b[i - n] })
}

/// Inverse of [`stack`] for two equal halves.
pub fn split(z: &Point) -> (Point, Point) {
    let n = z.len() / 2;
    (z.rows(0, n).into_owned(), z.rows(n, n).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_row_slice(v)
    }

    fn close(a: &Point, b: &Point, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn second_order_examples() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let s = SystemSpec::isehd(3.1, 1.0);
        let (dx, dv) = second_order_rhs(&s, &q, &z, 1.0, &p(&[1.0, 5.0]), &p(&[0.0, 0.0])).unwrap();
        assert!(close(&dx, &p(&[0.0, 0.0]), 0.0) && close(&dv, &p(&[0.0, 0.0]), 0.0));

        let s = SystemSpec::isihd(3.1, 1.0, 1.0);
        let (_, dv) = second_order_rhs(&s, &q, &z, 1.0, &p(&[1.0, 5.0]), &p(&[0.0, 0.0])).unwrap();
        assert!(close(&dv, &p(&[0.0, 0.0]), 0.0));

        let quad = Objective::quadratic_sc(1.0, p(&[0.0, 0.0])).unwrap();
        let s = SystemSpec::heavy_ball(SystemKind::HbExplicit, 0.4);
        let (_, dv) = second_order_rhs(&s, &quad, &z, 1.0, &p(&[1.0, 0.0]), &p(&[0.0, 0.0])).unwrap();
        assert!(close(&dv, &p(&[-1.0, 0.0]), 1e-15));
    }

    #[test]
    fn hessian_needed_for_explicit() {
        let q = Objective::quartic_l1(0.1);
        let z = PerturbationSignal::zero(2);
        let s = SystemSpec::isehd(3.1, 1.0);
        let r = second_order_rhs(&s, &q, &z, 1.0, &p(&[0.5, 5.0]), &p(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::HessianUnavailable(_))));
        assert!(s.validate(&q).is_err());
    }

    #[test]
    fn first_order_examples() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let s = SystemSpec::isihd(3.1, 1.0, 1.0);
        let x = p(&[3.0, -2.0]);
        let (dx, _) = first_order_rhs(&s, &q, &z, 2.0, &x, &x).unwrap();
        assert!(close(&dx, &p(&[0.0, 0.0]), 0.0));

        let s = SystemSpec::isehd(3.1, 1.0);
        let (dx, _) = first_order_rhs(&s, &q, &z, 1.0, &p(&[1.0, 5.0]), &p(&[-2.1, -10.5])).unwrap();
        assert!(close(&dx, &p(&[0.0, 0.0]), 1e-12));
        let (dx, _) = first_order_rhs(&s, &q, &z, 2.0, &p(&[2.0, 6.0]), &p(&[0.0, 0.0])).unwrap();
        assert!(close(&dx, &p(&[-5.1, -5.3]), 1e-12));

        let s = SystemSpec::isehd(3.1, 0.0);
        assert!(first_order_rhs(&s, &q, &z, 2.0, &x, &x).is_err());
    }

    #[test]
    fn lift_examples() {
        let q = Objective::quartic();
        let z = PerturbationSignal::zero(2);
        let s = SystemSpec::isihd(3.1, 1.0, 1.0);
        let (_, y0) = lift_initial(&s, &q, &z, &p(&[-10.0, 20.0]), &p(&[5.0, -5.0])).unwrap();
        assert!(close(&y0, &p(&[0.0, 10.0]), 1e-15));
        let (_, y0) = lift_initial(&s, &q, &z, &p(&[4.0, 4.0]), &p(&[0.0, 0.0])).unwrap();
        assert_eq!(y0, p(&[4.0, 4.0]));

        let s = SystemSpec::isehd(3.1, 1.0);
        let (_, y0) = lift_initial(&s, &q, &z, &p(&[1.0, 5.0]), &p(&[0.0, 0.0])).unwrap();
        assert!(close(&y0, &p(&[-2.1, -10.5]), 1e-12));
    }

    #[test]
    fn lift_reproduces_initial_velocity() {
        let q = Objective::quartic();
        let sig = PerturbationSignal::cosine_decay(1.1, 2).unwrap();
        let x0 = p(&[-10.0, 20.0]);
        let v0 = p(&[5.0, -5.0]);
        for s in [SystemSpec::isehd(3.1, 1.0), SystemSpec::isihd(3.1, 1.0, 1.0)] {
            let (x, y) = lift_initial(&s, &q, &sig, &x0, &v0).unwrap();
            let (dx, _) = first_order_rhs(&s, &q, &sig, 1.0, &x, &y).unwrap();
            assert!(close(&dx, &v0, 1e-12 * v0.norm().max(1.0) * 100.0), "{dx}");
        }
    }

    #[test]
    fn beta_schedule_examples() {
        let (b, bd) = beta_schedule(&SystemSpec::isihd(3.1, 1.0, 1.0), 10.0).unwrap();
        assert!((b - 1.1).abs() < 1e-15 && (bd + 0.01).abs() < 1e-15);
        let (b, bd) = beta_schedule(&SystemSpec::isihd(3.1, 0.7, 0.0), 3.0).unwrap();
        assert_eq!((b, bd), (0.7, 0.0));
        let (b, bd) = beta_schedule(&SystemSpec::isihd(3.1, 0.0, 1.0), 1.0).unwrap();
        assert_eq!((b, bd), (1.0, -1.0));
        assert!(beta_schedule(&SystemSpec::isihd(3.1, 0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn heavy_ball_warning() {
        let quad = Objective::quadratic_sc(1.0, p(&[0.0, 0.0])).unwrap();
        let ok = SystemSpec::heavy_ball(SystemKind::HbExplicit, 0.4);
        assert!(ok.validate(&quad).unwrap().is_empty());
        let loose = SystemSpec::heavy_ball(SystemKind::HbImplicit, 0.9);
        assert_eq!(loose.validate(&quad).unwrap().len(), 1);
        assert!(ok.validate(&Objective::quartic()).is_err());
    }

    #[test]
    fn stack_split_roundtrip() {
        let a = p(&[1.0, 2.0]);
        let b = p(&[3.0, 4.0]);
        let (a2, b2) = split(&stack(&a, &b));
        assert_eq!((a2, b2), (a, b));
    }
}
