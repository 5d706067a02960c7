//! Lyapunov energies evaluated along sampled trajectories.
//!
//! Error-coupling integrals `∫_t^∞` are truncated at the trajectory horizon
//! `T` and computed by the trapezoid rule on the sample grid, so every trace
//! is the `T`-truncated energy and its last tail entry is zero.

use crate::dynamics::beta_schedule;
use crate::error::{Error, Result};
use crate::objectives::{Objective, Point};
use crate::perturbations::PerturbationSignal;
use crate::quadrature::tail_trapezoid;
use crate::trajectory::Trajectory;

/// An increase `values[index + 1] − values[index]` beyond tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub increase: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_integrals: Vec<f64>,
    pub t1: f64,
    pub violations: Vec<Violation>,
}

impl EnergyTrace {
    fn new(name: &str, times: Vec<f64>, values: Vec<f64>, tail_integrals: Vec<f64>, t1: f64) -> Self {
        EnergyTrace {
            name: name.to_string(),
            times,
            values,
            tail_integrals,
            t1,
            violations: Vec::new(),
        }
    }

    /// Index of the first sample at or after `t1`, if any.
    pub fn t1_index(&self) -> Option<usize> {
        self.times.iter().position(|&t| t >= self.t1)
    }

    /// Value at the first sample at or after `t1`.
    pub fn value_at_t1(&self) -> Option<f64> {
        self.t1_index().map(|i| self.values[i])
    }

    /// Records [`check_monotone`] at `rel_tol` in `violations`.
    pub fn certify(mut self, rel_tol: f64) -> Self {
        self.violations = check_monotone(&self, rel_tol);
        self
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// All `i` with `times[i] ≥ t1` and
/// `values[i+1] − values[i] > rel_tol · max(|E(t1)|, 1e-30)`.
pub fn check_monotone(trace: &EnergyTrace, rel_tol: f64) -> Vec<Violation> {
    let Some(i1) = trace.t1_index() else {
        return Vec::new();
    };
    let tol = rel_tol * trace.values[i1].abs().max(1e-30);
    (i1..trace.values.len().saturating_sub(1))
        .filter_map(|i| {
            let inc = trace.values[i + 1] - trace.values[i];
            (inc > tol).then_some(Violation { index: i, increase: inc })
        })
        .collect()
}

/// Per-sample `f(x) − f̄`, requiring a known reference value.
fn gaps(traj: &Trajectory) -> Result<&[f64]> {
    traj.f_gap.as_deref().ok_or(Error::UnknownMinimum)
}

/// `f̄` as used by the trajectory's `f_gap` column.
pub fn reference_value(traj: &Trajectory, obj: &Objective) -> Result<f64> {
    let g = gaps(traj)?;
    Ok(obj.value(&traj.x[0])? - g[0])
}

/// `u̇ = ẋ + βξ`, with `ξ = ∇f(x)` on smooth runs and the recovered
/// subgradient on inclusion runs.
pub fn u_dot(traj: &Trajectory, obj: &Objective, beta: f64) -> Result<Vec<Point>> {
    let xi = traj.subgradients(obj)?;
    Ok(traj.velocity.iter().zip(&xi).map(|(v, g)| v + beta * g).collect())
}

fn g_samples(traj: &Trajectory, signal: &PerturbationSignal, beta: f64) -> Result<Vec<Point>> {
    traj.times.iter().map(|&t| signal.combine_g(beta, t)).collect()
}

fn check_xstar(traj: &Trajectory, xstar: &Point) -> Result<()> {
    if xstar.len() != traj.dimension() {
        return Err(Error::DimensionMismatch {
            expected: traj.dimension(),
            found: xstar.len(),
        });
    }
    Ok(())
}

/// `W(t) = ½‖u̇‖² + f(x) − f̄ − ∫_t^T ⟨u̇, g⟩`, `t1 = max(t0, 2αβ)`.
pub fn energy_w(traj: &Trajectory, obj: &Objective, signal: &PerturbationSignal, beta: f64) -> Result<EnergyTrace> {
    let gap = gaps(traj)?;
    let ud = u_dot(traj, obj, beta)?;
    let g = g_samples(traj, signal, beta)?;
    let integrand: Vec<f64> = ud.iter().zip(&g).map(|(u, g)| u.dot(g)).collect();
    let tail = tail_trapezoid(&traj.times, &integrand);
    let values = (0..traj.len())
        .map(|i| 0.5 * ud[i].norm_squared() + gap[i] - tail[i])
        .collect();
    let t1 = traj.spec.t0.max(2.0 * traj.spec.alpha * beta);
    Ok(EnergyTrace::new("W", traj.times.clone(), values, tail, t1))
}

/// Shared shape of `𝓔`, `𝓔_ε` and `𝓔_λ`:
/// `k(t)(f − f̄) + ½‖v‖² + (q/2)‖x − x*‖² − ∫_t^T τ⟨v, g⟩` with
/// `v = m(x − x*) + t u̇`.
#[allow(clippy::too_many_arguments)]
fn rate_energy(
    name: &str,
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    beta: f64,
    xstar: &Point,
    k: impl Fn(f64) -> f64,
    m: f64,
    q: f64,
    t1: f64,
) -> Result<EnergyTrace> {
    check_xstar(traj, xstar)?;
    let gap = gaps(traj)?;
    let ud = u_dot(traj, obj, beta)?;
    let g = g_samples(traj, signal, beta)?;
    let n = traj.len();
    let mut v = Vec::with_capacity(n);
    let mut integrand = Vec::with_capacity(n);
    for i in 0..n {
        let t = traj.times[i];
        let vi = m * (&traj.x[i] - xstar) + t * &ud[i];
        integrand.push(t * vi.dot(&g[i]));
        v.push(vi);
    }
    let tail = tail_trapezoid(&traj.times, &integrand);
    let values = (0..n)
        .map(|i| {
            let t = traj.times[i];
            k(t) * gap[i] + 0.5 * v[i].norm_squared() + 0.5 * q * (&traj.x[i] - xstar).norm_squared() - tail[i]
        })
        .collect();
    Ok(EnergyTrace::new(name, traj.times.clone(), values, tail, t1))
}

/// `𝓔(t) = δ(t)(f − f̄) + ½‖v‖² − ∫_t^T τ⟨v, g⟩` with `δ(t) = t² − βt`,
/// `v = (α−1)(x − x*) + t u̇`. Needs `α > 3`; `t1 = max(t0, β(α−2)/(α−3))`.
pub fn energy_fast(
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    alpha: f64,
    beta: f64,
    xstar: &Point,
) -> Result<EnergyTrace> {
    if !(alpha > 3.0) {
        return Err(Error::hypothesis("energy `fast`", "alpha > 3"));
    }
    let t1 = traj.spec.t0.max(beta * (alpha - 2.0) / (alpha - 3.0));
    rate_energy("fast", traj, obj, signal, beta, xstar, |t| delta(beta, t), alpha - 1.0, 0.0, t1)
}

/// `δ(t) = t²(1 − β/t)`.
pub fn delta(beta: f64, t: f64) -> f64 {
    t * t - beta * t
}

/// `(α − 3)/2`.
pub fn default_eps(alpha: f64) -> f64 {
    (alpha - 3.0) / 2.0
}

/// Validity threshold of `𝓔_ε`: the `(f − f̄)` coefficient of its derivative,
/// `(3 − α + ε)t + β(α − 2)`, is nonpositive from `β(α−2)/(α−3−ε)` on.
pub fn eps_threshold(t0: f64, alpha: f64, beta: f64, eps: f64) -> f64 {
    t0.max(beta * (alpha - 2.0) / (alpha - 3.0 - eps))
}

/// `𝓔_ε(t) = (δ + εβt)(f − f̄) + ½‖v_ε‖² + (ε(α−1−ε)/2)‖x − x*‖²
/// − ∫_t^T τ⟨v_ε, g⟩` with `v_ε = (α−1−ε)(x − x*) + t u̇`, `ε ∈ ]0, α−3[`.
pub fn energy_eps(
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    alpha: f64,
    beta: f64,
    eps: f64,
    xstar: &Point,
) -> Result<EnergyTrace> {
    if !(alpha > 3.0) {
        return Err(Error::hypothesis("energy `eps`", "alpha > 3"));
    }
    if !(eps > 0.0 && eps < alpha - 3.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in ]0, {}[, got {eps}", alpha - 3.0)));
    }
    let t1 = eps_threshold(traj.spec.t0, alpha, beta, eps);
    rate_energy(
        "eps",
        traj,
        obj,
        signal,
        beta,
        xstar,
        |t| delta(beta, t) + eps * beta * t,
        alpha - 1.0 - eps,
        eps * (alpha - 1.0 - eps),
        t1,
    )
}

/// `𝓔_λ(t) = t(t − β(λ+2−α))(f − f̄) + ½‖v_λ‖² + (λ(α−λ−1)/2)‖x − x*‖²
/// − ∫_t^T τ⟨v_λ, g⟩` with `v_λ = λ(x − x*) + t u̇`, `λ ∈ [2, α−1]`,
/// `t1 = max(t0, β)`.
pub fn energy_lambda(
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    alpha: f64,
    beta: f64,
    lambda: f64,
    xstar: &Point,
) -> Result<EnergyTrace> {
    if !(alpha >= 3.0) {
        return Err(Error::hypothesis("energy `lambda`", "alpha >= 3"));
    }
    if !(lambda >= 2.0 && lambda <= alpha - 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in [2, {}], got {lambda}",
            alpha - 1.0
        )));
    }
    let t1 = traj.spec.t0.max(beta);
    rate_energy(
        "lambda",
        traj,
        obj,
        signal,
        beta,
        xstar,
        |t| t * (t - beta * (lambda + 2.0 - alpha)),
        lambda,
        lambda * (alpha - lambda - 1.0),
        t1,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScVariant {
    Explicit,
    Implicit,
}

/// Strongly convex energies, no tail term, `t1 = t0`:
/// explicit `f(x) − f̄ + ½‖√μ(x − x*) + ẋ + β∇f(x)‖²`,
/// implicit `f(x + βẋ) − f̄ + ½‖√μ(x − x*) + ẋ‖²`.
pub fn energy_sc(traj: &Trajectory, obj: &Objective, beta: f64, variant: ScVariant) -> Result<EnergyTrace> {
    let mu = obj.mu();
    if !(mu > 0.0) {
        return Err(Error::hypothesis("energy `sc`", "mu > 0"));
    }
    let xstar = obj.known_minimizer().ok_or(Error::UnknownMinimum)?.clone();
    check_xstar(traj, &xstar)?;
    let f_bar = reference_value(traj, obj)?;
    let gap = gaps(traj)?;
    let s = mu.sqrt();
    let values = (0..traj.len())
        .map(|i| {
            let x = &traj.x[i];
            let v = &traj.velocity[i];
            match variant {
                ScVariant::Explicit => {
                    let w = s * (x - &xstar) + v + beta * obj.gradient(x)?;
                    Ok(gap[i] + 0.5 * w.norm_squared())
                }
                ScVariant::Implicit => {
                    let w = s * (x - &xstar) + v;
                    Ok(obj.value(&(x + beta * v))? - f_bar + 0.5 * w.norm_squared())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let name = match variant {
        ScVariant::Explicit => "sc-explicit",
        ScVariant::Implicit => "sc-implicit",
    };
    Ok(EnergyTrace::new(name, traj.times.clone(), values, vec![0.0; traj.len()], traj.spec.t0))
}

/// Coefficients of the implicit-system energy: constant `b`, `c(t) = t`,
/// `d = b(α−1−b)` and
/// `a(t) = t²(t² − bγt − bβ)/(t² − αγt − β(α+1))`, the unique `a` making the
/// equality condition hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitCoefficients {
    pub alpha: f64,
    pub b: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// `(α+1)/2` clamped into `]2, α−1[`.
pub fn default_b(alpha: f64) -> f64 {
    let mid = (alpha + 1.0) / 2.0;
    let (lo, hi) = (2.0, alpha - 1.0);
    if mid > lo && mid < hi {
        mid
    } else {
        0.5 * (lo + hi)
    }
}

/// Checked constructor: `α > 3`, `b ∈ ]2, α−1[`.
pub fn implicit_coefficients(alpha: f64, b: f64, gamma: f64, beta: f64) -> Result<ImplicitCoefficients> {
    if !(alpha > 3.0) {
        return Err(Error::hypothesis("implicit coefficients", "alpha > 3"));
    }
    if !(b > 2.0 && b < alpha - 1.0) {
        return Err(Error::hypothesis("implicit coefficients", format!("b in ]2, {}[", alpha - 1.0)));
    }
    ImplicitCoefficients::unchecked(alpha, b, gamma, beta)
}

impl ImplicitCoefficients {
    /// Only `γ, β ≥ 0` is enforced; boundary cases such as `b = α − 1` or
    /// `(α, b) = (3, 2)` are allowed.
    pub fn unchecked(alpha: f64, b: f64, gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma >= 0.0 && beta >= 0.0) {
            return Err(Error::InvalidParameter("gamma and beta must be >= 0".into()));
        }
        Ok(ImplicitCoefficients { alpha, b, gamma, beta })
    }

    fn numerator(&self, t: f64) -> f64 {
        t * t - self.b * self.gamma * t - self.b * self.beta
    }

    pub fn denominator(&self, t: f64) -> f64 {
        t * t - self.alpha * self.gamma * t - self.beta * (self.alpha + 1.0)
    }

    /// Largest real root of the denominator; `a` is finite beyond it.
    pub fn pole(&self) -> f64 {
        let p = self.alpha * self.gamma;
        let q = self.beta * (self.alpha + 1.0);
        0.5 * (p + (p * p + 4.0 * q).sqrt())
    }

    fn check(&self, t: f64) -> Result<()> {
        let den = self.denominator(t);
        if !(den > 0.0) {
            return Err(Error::CoefficientPole { t, denominator: den });
        }
        Ok(())
    }

    pub fn a(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(t * t * self.numerator(t) / self.denominator(t))
    }

    pub fn a_dot(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let n = self.numerator(t);
        let d = self.denominator(t);
        let dn = 2.0 * t - self.b * self.gamma;
        let dd = 2.0 * t - self.alpha * self.gamma;
        Ok((2.0 * t * n + t * t * dn) / d - t * t * n * dd / (d * d))
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn b_dot(&self) -> f64 {
        0.0
    }

    pub fn c(&self, t: f64) -> f64 {
        t
    }

    pub fn c_dot(&self) -> f64 {
        1.0
    }

    pub fn d(&self) -> f64 {
        self.b * (self.alpha - 1.0 - self.b)
    }

    pub fn d_dot(&self) -> f64 {
        0.0
    }

    /// The six left-hand sides at `t`; the third and fifth must vanish, the
    /// rest be nonpositive.
    pub fn conditions(&self, t: f64) -> Result<[f64; 6]> {
        let a = self.a(t)?;
        let a_dot = self.a_dot(t)?;
        let (b, c) = (self.b, self.c(t));
        let alpha_t = self.alpha / t;
        let beta_t = self.gamma + self.beta / t;
        let beta_dot = -self.beta / (t * t);
        Ok([
            a_dot - b * c,
            -a * beta_t,
            -a * alpha_t * beta_t + a * beta_dot + a - c * c + b * c * beta_t,
            self.b_dot() * b + 0.5 * self.d_dot(),
            self.b_dot() * c + b * (b + self.c_dot() - c * alpha_t) + self.d(),
            c * (b + self.c_dot() - c * alpha_t),
        ])
    }
}

/// Absolute tolerance on the two equality conditions.
pub const EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub times: Vec<f64>,
    /// `None` inside the pole region.
    pub values: Vec<Option<[f64; 6]>>,
    pub holds: Vec<bool>,
    pub max_equality_residual: f64,
}

fn conditions_hold(c: &[f64; 6]) -> bool {
    let ineq = [c[0], c[1], c[3], c[5]];
    ineq.iter().all(|&v| v <= 0.0) && c[2].abs() <= EQUALITY_TOL && c[4].abs() <= EQUALITY_TOL
}

/// Evaluates the six conditions on `t_grid` and returns the smallest grid
/// time from which they hold at every later grid point.
pub fn check_conditions(coeffs: &ImplicitCoefficients, t_grid: &[f64]) -> Result<(f64, ConditionReport)> {
    let mut values = Vec::with_capacity(t_grid.len());
    let mut holds = Vec::with_capacity(t_grid.len());
    let mut max_eq: f64 = 0.0;
    for &t in t_grid {
        match coeffs.conditions(t) {
            Ok(c) => {
                max_eq = max_eq.max(c[2].abs()).max(c[4].abs());
                holds.push(conditions_hold(&c));
                values.push(Some(c));
            }
            Err(Error::CoefficientPole { .. }) => {
                holds.push(false);
                values.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let mut first = None;
    for i in (0..t_grid.len()).rev() {
        if holds[i] {
            first = Some(i);
        } else {
            break;
        }
    }
    let i1 = first.ok_or(Error::ConditionsNeverHold)?;
    Ok((
        t_grid[i1],
        ConditionReport {
            times: t_grid.to_vec(),
            values,
            holds,
            max_equality_residual: max_eq,
        },
    ))
}

/// The implicit-system energy
/// `a(f(x + β(t)ẋ) − f̄) + ½‖b(x − x*) + tẋ‖² + (d/2)‖x − x*‖²` minus the
/// tails `∫ τ⟨b(x − x*) + τẋ, e⟩` and `∫ aβ(τ)⟨∇f(x + β(τ)ẋ), e⟩`.
///
/// Samples inside the pole region of `a` are dropped; the trace starts at
/// the first pole-free sample and `t1` is taken from `check_conditions` on
/// the trajectory grid.
pub fn energy_implicit_convex(
    traj: &Trajectory,
    obj: &Objective,
    signal: &PerturbationSignal,
    coeffs: &ImplicitCoefficients,
    xstar: &Point,
) -> Result<EnergyTrace> {
    check_xstar(traj, xstar)?;
    let f_bar = reference_value(traj, obj)?;
    let start = traj
        .times
        .iter()
        .position(|&t| coeffs.denominator(t) > 0.0)
        .ok_or(Error::ConditionsNeverHold)?;
    let times: Vec<f64> = traj.times[start..].to_vec();
    let (t1, _) = check_conditions(coeffs, &times)?;
    let spec = &traj.spec;
    let (b, d) = (coeffs.b(), coeffs.d());
    let n = times.len();
    let mut head = Vec::with_capacity(n);
    let mut integrand = Vec::with_capacity(n);
    for (k, &t) in times.iter().enumerate() {
        let i = start + k;
        let x = &traj.x[i];
        let v = &traj.velocity[i];
        let bt = beta_schedule(spec, t)?.0;
        let a = coeffs.a(t)?;
        let p = x + bt * v;
        let e = signal.eval(t)?;
        let w = b * (x - xstar) + t * v;
        head.push(
            a * (obj.value(&p)? - f_bar) + 0.5 * w.norm_squared() + 0.5 * d * (x - xstar).norm_squared(),
        );
        integrand.push(t * w.dot(&e) + a * bt * obj.gradient(&p)?.dot(&e));
    }
    let tail = tail_trapezoid(&times, &integrand);
    let values = head.iter().zip(&tail).map(|(h, s)| h - s).collect();
    Ok(EnergyTrace::new("implicit-convex", times, values, tail, t1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(values: &[f64]) -> EnergyTrace {
        let times = (0..values.len()).map(|i| i as f64).collect();
        EnergyTrace::new("t", times, values.to_vec(), vec![0.0; values.len()], 0.0)
    }

    #[test]
    fn monotone_examples() {
        assert!(check_monotone(&trace(&[3.0, 2.0, 2.0, 1.0]), 0.0).is_empty());
        let v = check_monotone(&trace(&[1.0, 2.0]), 0.0);
        assert_eq!(v, vec![Violation { index: 0, increase: 1.0 }]);
    }

    #[test]
    fn violations_respect_t1() {
        let mut tr = trace(&[1.0, 2.0, 1.5, 1.4]);
        tr.t1 = 1.0;
        assert!(check_monotone(&tr, 0.0).is_empty());
    }

    #[test]
    fn delta_example() {
        assert_eq!(delta(1.0, 10.0), 90.0);
    }

    #[test]
    fn coefficient_examples() {
        let c = implicit_coefficients(3.1, 2.05, 1.0, 1.0).unwrap();
        assert!((c.d() - 0.1025).abs() < 1e-15);
        // a(10) = 100·(100 − 20.5 − 2.05)/(100 − 31 − 4.1)
        let a10 = c.a(10.0).unwrap();
        assert!((a10 - 100.0 * 77.45 / 64.9).abs() < 1e-10, "{a10}");
        let big = 1e6;
        assert!((c.a(big).unwrap() / (big * big) - 1.0).abs() < 1e-4);
        assert!((default_b(3.1) - 2.05).abs() < 1e-15);
        assert!(matches!(c.a(4.0), Err(Error::CoefficientPole { .. })));
        assert!((c.pole() - 4.1).abs() < 1e-12);
    }

    #[test]
    fn a_dot_matches_finite_differences() {
        let c = implicit_coefficients(3.1, 2.05, 1.0, 1.0).unwrap();
        for t in [5.0, 10.0, 30.0] {
            let h = 1e-5;
            let fd = (c.a(t + h).unwrap() - c.a(t - h).unwrap()) / (2.0 * h);
            assert!((fd - c.a_dot(t).unwrap()).abs() < 1e-6 * fd.abs());
        }
    }

    #[test]
    fn conditions_on_default_grid() {
        let c = implicit_coefficients(3.1, 2.05, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..=4900).map(|i| 1.0 + i as f64 * 0.01).collect();
        let (t1, rep) = check_conditions(&c, &grid).unwrap();
        assert!(t1 > 4.1 && t1 < 50.0);
        assert!(rep.max_equality_residual <= EQUALITY_TOL);
    }

    #[test]
    fn boundary_cases() {
        let c = ImplicitCoefficients::unchecked(3.1, 2.1, 1.0, 1.0).unwrap();
        assert!(c.d().abs() < 1e-15);
        assert_eq!(c.conditions(30.0).unwrap()[3], 0.0);
        let c = ImplicitCoefficients::unchecked(3.0, 2.0, 0.0, 1.0).unwrap();
        for t in [10.0, 50.0, 1000.0] {
            assert!(c.conditions(t).unwrap()[0] <= 0.0);
        }
        assert!(implicit_coefficients(3.0, 2.0, 0.0, 1.0).is_err());
        assert!(implicit_coefficients(3.1, 2.1, 1.0, 1.0).is_err());
    }
}
