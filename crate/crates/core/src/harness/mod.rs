//! Scenario configuration, orchestration and file output.

pub mod config;
pub mod output;
pub mod run;
pub mod section6;

pub use config::{
    ComponentsConfig, EnergyName, EnergyParams, FormChoice, InitialData, IntegratorKind, IntegratorSection,
    ObjectiveConfig, ObjectiveId, PerturbationConfig, PerturbationKind, Scenario, ScenarioConfig,
};
pub use output::{read_csv_column, write_artifacts};
pub use run::{run_scenario, EnergyOutcome, RunReport};
pub use section6::{reproduce_section6, section6_config, section6_grid, Section6Report, Section6Row};

use crate::error::{Error, Result};
use crate::objectives::{Objective, Point};

/// Stopping threshold of [`polish_minimizer`] on the prox-gradient residual.
pub const POLISH_TOL: f64 = 1e-12;
const POLISH_MAX_ITER: usize = 100_000;

/// Result of [`polish_minimizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polished {
    pub x: Point,
    pub value: f64,
    /// `‖x − prox_{w‖·‖₁}(x − ∇φ(x))‖` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

fn soft_threshold(v: &Point, k: f64) -> Point {
    v.map(|u| u.signum() * (u.abs() - k).max(0.0))
}

/// Minimizes `φ + w‖·‖₁` by proximal gradient with monotone backtracking
/// (the step only shrinks), from the known minimizer if any, else from the
/// origin.
pub fn polish_minimizer(obj: &Objective) -> Result<Polished> {
    let w = obj.nonsmooth_weight();
    let mut x = obj
        .known_minimizer()
        .cloned()
        .unwrap_or_else(|| Point::zeros(obj.dimension()));
    let residual = |x: &Point| -> Result<f64> {
        let g = obj.gradient(x)?;
        Ok((x - soft_threshold(&(x - g), w)).norm())
    };
    let mut s: f64 = 1.0;
    for it in 0..POLISH_MAX_ITER {
        let r = residual(&x)?;
        if r <= POLISH_TOL {
            return Ok(Polished {
                value: obj.value(&x)?,
                x,
                residual: r,
                iterations: it,
            });
        }
        let g = obj.gradient(&x)?;
        let fx = obj.smooth_value(&x)?;
        loop {
            let z = soft_threshold(&(&x - s * &g), s * w);
            let d = &z - &x;
            let model = fx + g.dot(&d) + d.norm_squared() / (2.0 * s);
            if obj.smooth_value(&z)? <= model + 1e-15 * fx.abs().max(1.0) {
                x = z;
                break;
            }
            s *= 0.5;
            if s < 1e-20 {
                return Err(Error::InvalidParameter("minimizer polish: step collapsed".into()));
            }
        }
    }
    Err(Error::InvalidParameter(format!(
        "minimizer polish did not reach residual {POLISH_TOL} in {POLISH_MAX_ITER} iterations"
    )))
}
