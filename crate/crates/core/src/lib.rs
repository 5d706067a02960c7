//! Perturbed inertial dynamics with Hessian-driven damping.

// `!(a > b)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod lyapunov;
pub mod objectives;
pub mod perturbations;
pub mod quadrature;
pub mod trajectory;

pub use analysis::{RateClass, RateReport};
pub use dynamics::{SystemKind, SystemSpec};
pub use error::{Error, Result};
pub use harness::{run_scenario, RunReport, ScenarioConfig};
pub use objectives::{CoordinateFn, Objective, Point};
pub use perturbations::{Components, Integrability, PerturbationSignal};
pub use trajectory::{StateForm, Trajectory};
