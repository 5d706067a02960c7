use crate::analysis::{fit_rate_log_resampled, sc_bound_check, BoundReport, RateReport};
use crate::dynamics::{lift_initial, SystemKind, SystemSpec};
use crate::error::Result;
use crate::integrators::{
    integrate_prox_explicit, integrate_prox_implicit, integrate_prox_implicit_rescaled, solve_first_order_lifted,
    solve_second_order, ProxOptions,
};
use crate::lyapunov::{
    energy_eps, energy_fast, energy_implicit_convex, energy_lambda, energy_sc, energy_w, implicit_coefficients,
    EnergyTrace, ScVariant,
};
use crate::objectives::Point;
use crate::perturbations::{classify_integrability, Integrability};
use crate::trajectory::Trajectory;

use super::config::{EnergyName, FormChoice, IntegratorKind, Scenario, ScenarioConfig};

#[derive(Debug, Clone)]
pub struct EnergyOutcome {
    pub name: EnergyName,
    pub trace: EnergyTrace,
    pub tolerance: f64,
    /// Only for `sc`.
    pub bound: Option<BoundReport>,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    /// How the system was integrated, e.g. `rk45 first-order`.
    pub route: String,
    pub trajectory: Trajectory,
    pub f_bar: Option<f64>,
    pub xstar: Option<Point>,
    pub rate: std::result::Result<RateReport, String>,
    /// Moment order checked and its classification.
    pub integrability: (f64, Integrability),
    pub energies: Vec<EnergyOutcome>,
    pub notes: Vec<String>,
}

impl RunReport {
    /// True iff every requested certification passed.
    pub fn certified(&self) -> bool {
        self.energies.iter().all(|e| e.certified)
    }

    pub fn energy(&self, name: EnergyName) -> Option<&EnergyOutcome> {
        self.energies.iter().find(|e| e.name == name)
    }
}

fn smooth_twin(kind: SystemKind) -> SystemKind {
    match kind {
        SystemKind::IsehdInclusion => SystemKind::Isehd,
        SystemKind::IsihdInclusion => SystemKind::Isihd,
        k => k,
    }
}

fn inclusion_twin(kind: SystemKind) -> SystemKind {
    match kind {
        SystemKind::Isehd => SystemKind::IsehdInclusion,
        SystemKind::Isihd => SystemKind::IsihdInclusion,
        k => k,
    }
}

fn integrate(sc: &Scenario) -> Result<(Trajectory, String)> {
    let cfg = &sc.config;
    let (obj, signal) = (&sc.objective, &sc.signal);
    let t_end = cfg.horizon;
    match cfg.integrator.kind {
        IntegratorKind::Prox => {
            let spec = sc.spec.clone().with_kind(inclusion_twin(sc.spec.kind));
            let y0 = match (&sc.y0, &sc.v0) {
                (Some(y0), _) => y0.clone(),
                (None, Some(v0)) => lift_initial(&spec, obj, signal, &sc.x0, v0)?.1,
                (None, None) => unreachable!("validated"),
            };
            let opts = ProxOptions {
                h: cfg.integrator.h,
                output: cfg.integrator.output.clone(),
            };
            let span = (spec.t0, t_end);
            let init = (&sc.x0, &y0);
            if spec.kind == SystemKind::IsehdInclusion {
                Ok((integrate_prox_explicit(&spec, obj, signal, span, init, &opts)?, "prox explicit".into()))
            } else if spec.beta == 0.0 {
                Ok((integrate_prox_implicit(&spec, obj, signal, span, init, &opts)?, "prox implicit".into()))
            } else {
                Ok((
                    integrate_prox_implicit_rescaled(&spec, obj, signal, span, init, &opts)?,
                    "prox implicit rescaled".into(),
                ))
            }
        }
        IntegratorKind::Rk45 => {
            let spec = sc.spec.clone().with_kind(smooth_twin(sc.spec.kind));
            let rk = cfg.integrator.rk_config()?;
            let first = match cfg.integrator.form {
                FormChoice::FirstOrder => true,
                FormChoice::SecondOrder => false,
                FormChoice::Auto => {
                    sc.y0.is_some()
                        || (spec.kind == SystemKind::Isehd && !(obj.has_hessian() && signal.derivative_is_analytic()))
                }
            };
            if first {
                let y0 = match (&sc.y0, &sc.v0) {
                    (Some(y0), _) => y0.clone(),
                    (None, Some(v0)) => lift_initial(&spec, obj, signal, &sc.x0, v0)?.1,
                    (None, None) => unreachable!("validated"),
                };
                let tr = solve_first_order_lifted(&spec, obj, signal, t_end, &sc.x0, &y0, &rk)?;
                Ok((tr, "rk45 first-order".into()))
            } else {
                let v0 = sc.v0.as_ref().expect("validated");
                let tr = solve_second_order(&spec, obj, signal, t_end, &sc.x0, v0, &rk)?;
                Ok((tr, "rk45 second-order".into()))
            }
        }
    }
}

fn moment_order(spec: &SystemSpec) -> f64 {
    match spec.kind {
        SystemKind::Isehd | SystemKind::IsehdInclusion => 1.0,
        SystemKind::Isihd | SystemKind::IsihdInclusion => 2.0,
        SystemKind::HbExplicit | SystemKind::HbImplicit => 0.0,
    }
}

fn evaluate_energy(sc: &Scenario, traj: &Trajectory, name: EnergyName) -> Result<EnergyOutcome> {
    let (obj, signal) = (&sc.objective, &sc.signal);
    let spec = &traj.spec;
    let params = &sc.config.energy_params;
    let (a, b) = (spec.alpha, spec.beta);
    let xstar = || obj.known_minimizer().cloned().ok_or(crate::error::Error::UnknownMinimum);
    let tolerance = params.monotone_tol(name);
    let mut bound = None;
    let trace = match name {
        EnergyName::W => energy_w(traj, obj, signal, b)?,
        EnergyName::Fast => energy_fast(traj, obj, signal, a, b, &xstar()?)?,
        EnergyName::Eps => energy_eps(traj, obj, signal, a, b, params.eps(a), &xstar()?)?,
        EnergyName::Lambda => energy_lambda(traj, obj, signal, a, b, params.lambda(), &xstar()?)?,
        EnergyName::Sc => {
            let variant = if spec.kind == SystemKind::HbExplicit {
                ScVariant::Explicit
            } else {
                ScVariant::Implicit
            };
            let t = energy_sc(traj, obj, b, variant)?;
            bound = Some(sc_bound_check(&t, obj, signal, b, variant)?);
            t
        }
        EnergyName::ImplicitConvex => {
            let c = implicit_coefficients(a, params.b(a), spec.gamma, b)?;
            energy_implicit_convex(traj, obj, signal, &c, &xstar()?)?
        }
    };
    let trace = trace.certify(tolerance);
    // the strongly convex energy is certified by its exponential envelope;
    // with e ≠ 0 it is not expected to be monotone
    let certified = match &bound {
        Some(b) => b.holds,
        None => trace.violations.is_empty(),
    };
    Ok(EnergyOutcome {
        name,
        trace,
        tolerance,
        bound,
        certified,
    })
}

/// Integrates a validated scenario, evaluates its energies and fits the
/// decay rate of `f − f̄`. Nothing is written to disk.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    let sc = cfg.validate()?;
    let (trajectory, route) = integrate(&sc)?;
    let mut notes = sc.warnings.clone();

    let p = moment_order(&trajectory.spec);
    let class = classify_integrability(&sc.signal, p)?;
    if class != Integrability::Converged {
        notes.push(format!(
            "moment integral of t^{p}|e(t)| is {}: rate and convergence theorems do not apply",
            class.as_str()
        ));
    }

    let f_bar = sc.objective.known_min_value();
    let rate = match &trajectory.f_gap {
        Some(gap) => {
            let w = cfg.rate_window.map(|[lo, hi]| (lo, hi));
            fit_rate_log_resampled(&trajectory.times, gap, w).map_err(|e| e.to_string())
        }
        None => Err("f_bar unknown".to_string()),
    };

    let mut energies = Vec::with_capacity(cfg.energies.len());
    for &name in &cfg.energies {
        let out = evaluate_energy(&sc, &trajectory, name)?;
        if out.trace.t1_index().is_none() {
            notes.push(format!(
                "energy {}: threshold t1 = {} lies beyond the horizon, nothing to certify",
                name.as_str(),
                out.trace.t1
            ));
        }
        energies.push(out);
    }

    Ok(RunReport {
        xstar: sc.objective.known_minimizer().cloned(),
        scenario: sc,
        route,
        trajectory,
        f_bar,
        rate,
        integrability: (p, class),
        energies,
        notes,
    })
}
