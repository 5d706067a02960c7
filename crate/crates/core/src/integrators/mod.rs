//! Time-steppers and their trajectory-producing wrappers.

pub mod prox;
pub mod rescale;
pub mod rk;

pub use prox::{integrate_prox_explicit, integrate_prox_implicit, integrate_prox_implicit_rescaled, ProxOptions};
pub use rescale::{time_rescale, TimeRescale};
pub use rk::{integrate_rk, integrate_rk4_fixed, IntegratorConfig, OutputGrid, RkSolution};

use crate::dynamics::{first_order_rhs, lift_initial, second_order_rhs, split, stack, velocity_from_first_order, SystemSpec};
use crate::error::Result;
use crate::objectives::{Objective, Point};
use crate::perturbations::PerturbationSignal;
use crate::trajectory::{StateForm, Trajectory};

/// Integrates the second-order system in `(x, ẋ)` from `(x0, v0)`.
pub fn solve_second_order(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_end: f64,
    x0: &Point,
    v0: &Point,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let rhs = |t: f64, z: &Point| -> Result<Point> {
        let (x, v) = split(z);
        let (dx, dv) = second_order_rhs(spec, obj, signal, t, &x, &v)?;
        Ok(stack(&dx, &dv))
    };
    let sol = integrate_rk(rhs, (spec.t0, t_end), &stack(x0, v0), cfg)?;
    let (x, v): (Vec<Point>, Vec<Point>) = sol.states.iter().map(split).unzip();
    Trajectory::assemble(spec.clone(), StateForm::Velocity, sol.times, x, v.clone(), v, None, obj, None)
}

/// Integrates the first-order reformulation in `(x, y)`, lifting `(x0, v0)`.
pub fn solve_first_order(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_end: f64,
    x0: &Point,
    v0: &Point,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (x0, y0) = lift_initial(spec, obj, signal, x0, v0)?;
    solve_first_order_lifted(spec, obj, signal, t_end, &x0, &y0, cfg)
}

/// As [`solve_first_order`] from an already lifted pair `(x0, y0)`.
pub fn solve_first_order_lifted(
    spec: &SystemSpec,
    obj: &Objective,
    signal: &PerturbationSignal,
    t_end: f64,
    x0: &Point,
    y0: &Point,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let rhs = |t: f64, z: &Point| -> Result<Point> {
        let (x, y) = split(z);
        let (dx, dy) = first_order_rhs(spec, obj, signal, t, &x, &y)?;
        Ok(stack(&dx, &dy))
    };
    let sol = integrate_rk(rhs, (spec.t0, t_end), &stack(x0, y0), cfg)?;
    let (x, y): (Vec<Point>, Vec<Point>) = sol.states.iter().map(split).unzip();
    let velocity = sol
        .times
        .iter()
        .zip(x.iter().zip(&y))
        .map(|(&t, (xi, yi))| velocity_from_first_order(spec, obj, signal, t, xi, yi))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::assemble(spec.clone(), StateForm::Auxiliary, sol.times, x, y, velocity, None, obj, None)
}
