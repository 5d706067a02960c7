//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! horizon = 50.0
//! energies = ["W", "fast"]
//! rate_window = [10.0, 50.0]   # optional, default [T/5, T]
//!
//! [objective]
//! id = "quartic"               # quartic | quartic-l1 | quadratic
//!
//! [system]
//! kind = "ISEHD"
//! alpha = 3.1
//! beta = 1.0
//!
//! [perturbation]
//! kind = "cosine-decay"        # zero | cosine-decay
//! delta = 3.1
//! components = "all"           # or a list of 0-based indices
//!
//! [integrator]
//! kind = "rk45"                # rk45 | prox
//! output = { kind = "uniform", n = 2000 }
//!
//! [initial]
//! x0 = [-10.0, 20.0]
//! v0 = [5.0, -5.0]             # or y0 for the first-order state
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemKind, SystemSpec};
use crate::error::{Error, Result};
use crate::integrators::{IntegratorConfig, OutputGrid};
use crate::lyapunov::{default_b, default_eps, implicit_coefficients};
use crate::objectives::{Objective, Point};
use crate::perturbations::{Components, PerturbationSignal};

use super::polish_minimizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energies: Vec<EnergyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_window: Option<[f64; 2]>,
    pub objective: ObjectiveConfig,
    pub system: SystemSpec,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    pub initial: InitialData,
    #[serde(default, skip_serializing_if = "EnergyParams::is_empty")]
    pub energy_params: EnergyParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveId {
    /// `(x₁ − 1)⁴ + (x₂ − 5)²`.
    Quartic,
    /// The quartic plus `weight·‖x‖₁`.
    QuarticL1,
    /// `(μ/2)‖x − x*‖²`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub id: ObjectiveId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xstar: Option<Vec<f64>>,
}

pub const DEFAULT_L1_WEIGHT: f64 = 0.1;

impl ObjectiveConfig {
    pub fn quartic() -> Self {
        ObjectiveConfig {
            id: ObjectiveId::Quartic,
            weight: None,
            mu: None,
            xstar: None,
        }
    }

    pub fn quartic_l1(weight: f64) -> Self {
        ObjectiveConfig {
            id: ObjectiveId::QuarticL1,
            weight: Some(weight),
            mu: None,
            xstar: None,
        }
    }

    pub fn quadratic(mu: f64, xstar: Vec<f64>) -> Self {
        ObjectiveConfig {
            id: ObjectiveId::Quadratic,
            weight: None,
            mu: Some(mu),
            xstar: Some(xstar),
        }
    }

    /// Builds the objective. A positive ℓ₁ weight has no closed-form
    /// minimizer; it is found by [`polish_minimizer`] and recorded.
    pub fn build(&self) -> Result<Objective> {
        let unused = |key: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::Config(format!("objective `{}` takes no `{key}`", self.id_str())))
            } else {
                Ok(())
            }
        };
        match self.id {
            ObjectiveId::Quartic => {
                unused("weight", self.weight.is_some())?;
                unused("mu", self.mu.is_some())?;
                unused("xstar", self.xstar.is_some())?;
                Ok(Objective::quartic())
            }
            ObjectiveId::QuarticL1 => {
                unused("mu", self.mu.is_some())?;
                unused("xstar", self.xstar.is_some())?;
                let w = self.weight.unwrap_or(DEFAULT_L1_WEIGHT);
                if w == 0.0 {
                    let q = Objective::quartic();
                    let xs = q.known_minimizer().cloned().expect("quartic minimizer");
                    return Ok(Objective::quartic_l1(0.0).with_minimizer(xs, 0.0));
                }
                let obj = Objective::quartic_l1(w);
                let p = polish_minimizer(&obj)?;
                Ok(obj.with_minimizer(p.x, p.value))
            }
            ObjectiveId::Quadratic => {
                unused("weight", self.weight.is_some())?;
                let mu = self
                    .mu
                    .ok_or_else(|| Error::Config("objective `quadratic` needs `mu`".into()))?;
                let xs = self
                    .xstar
                    .as_ref()
                    .ok_or_else(|| Error::Config("objective `quadratic` needs `xstar`".into()))?;
                Objective::quadratic_sc(mu, Point::from_row_slice(xs))
            }
        }
    }

    fn id_str(&self) -> &'static str {
        match self.id {
            ObjectiveId::Quartic => "quartic",
            ObjectiveId::QuarticL1 => "quartic-l1",
            ObjectiveId::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    #[default]
    Zero,
    CosineDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AllKeyword {
    All,
}

/// `"all"` or a list of 0-based coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentsConfig {
    #[allow(private_interfaces)]
    All(AllKeyword),
    Indices(Vec<usize>),
}

impl Default for ComponentsConfig {
    fn default() -> Self {
        ComponentsConfig::All(AllKeyword::All)
    }
}

impl ComponentsConfig {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn to_components(&self) -> Components {
        match self {
            ComponentsConfig::All(_) => Components::All,
            ComponentsConfig::Indices(i) => Components::Indices(i.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub kind: PerturbationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub components: ComponentsConfig,
}

impl PerturbationConfig {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn cosine_decay(delta: f64) -> Self {
        PerturbationConfig {
            kind: PerturbationKind::CosineDecay,
            delta: Some(delta),
            components: ComponentsConfig::all(),
        }
    }

    pub fn build(&self, dimension: usize) -> Result<PerturbationSignal> {
        let s = match self.kind {
            PerturbationKind::Zero => {
                if self.delta.is_some() {
                    return Err(Error::Config("perturbation `zero` takes no `delta`".into()));
                }
                PerturbationSignal::zero(dimension)
            }
            PerturbationKind::CosineDecay => {
                let d = self
                    .delta
                    .ok_or_else(|| Error::Config("perturbation `cosine-decay` needs `delta`".into()))?;
                PerturbationSignal::cosine_decay(d, dimension)?
            }
        };
        s.with_components(&self.components.to_components())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Adaptive Dormand–Prince.
    #[default]
    Rk45,
    /// Fixed-step proximal scheme for the inclusions.
    Prox,
}

/// Which state the RK integrator advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormChoice {
    /// Second order where possible; ISEHD switches to the first-order form
    /// when the objective has no Hessian or `ė` is not analytic.
    #[default]
    Auto,
    SecondOrder,
    FirstOrder,
}

pub const DEFAULT_OUTPUT_POINTS: usize = 2000;

fn default_output() -> OutputGrid {
    OutputGrid::Uniform { n: DEFAULT_OUTPUT_POINTS }
}

fn default_rel_tol() -> f64 {
    1e-8
}

fn default_abs_tol() -> f64 {
    1e-10
}

fn default_h() -> f64 {
    1e-3
}

fn default_h_max() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub kind: IntegratorKind,
    #[serde(default)]
    pub form: FormChoice,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Largest RK step.
    #[serde(default = "default_h_max")]
    pub h_max: f64,
    /// Prox step.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_output")]
    pub output: OutputGrid,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            kind: IntegratorKind::Rk45,
            form: FormChoice::Auto,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            h_max: default_h_max(),
            h: default_h(),
            output: default_output(),
        }
    }
}

impl IntegratorSection {
    pub fn prox(h: f64) -> Self {
        IntegratorSection {
            kind: IntegratorKind::Prox,
            h,
            ..Self::default()
        }
    }

    pub fn rk_config(&self) -> Result<IntegratorConfig> {
        let cfg = IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_max: self.h_max,
            output: self.output.clone(),
            ..IntegratorConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

impl InitialData {
    pub fn velocity(x0: Vec<f64>, v0: Vec<f64>) -> Self {
        InitialData {
            x0,
            v0: Some(v0),
            y0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnergyName {
    #[serde(rename = "W")]
    W,
    #[serde(rename = "fast")]
    Fast,
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "sc")]
    Sc,
    #[serde(rename = "implicit-convex")]
    ImplicitConvex,
}

impl EnergyName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyName::W => "W",
            EnergyName::Fast => "fast",
            EnergyName::Eps => "eps",
            EnergyName::Lambda => "lambda",
            EnergyName::Sc => "sc",
            EnergyName::ImplicitConvex => "implicit-convex",
        }
    }
}

/// Per-energy parameters; unset values take the documented defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    /// `ε` of `eps`, default `(α − 3)/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `λ` of `lambda`, default 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `b` of `implicit-convex`, default `(α + 1)/2` clamped into `]2, α − 1[`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Relative monotonicity tolerance, default 1e-6 (1e-5 for `lambda`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_tol: Option<f64>,
}

impl EnergyParams {
    pub fn is_empty(&self) -> bool {
        *self == EnergyParams::default()
    }

    pub fn eps(&self, alpha: f64) -> f64 {
        self.eps.unwrap_or_else(|| default_eps(alpha))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(2.0)
    }

    pub fn b(&self, alpha: f64) -> f64 {
        self.b.unwrap_or_else(|| default_b(alpha))
    }

    pub fn monotone_tol(&self, energy: EnergyName) -> f64 {
        self.monotone_tol.unwrap_or(match energy {
            EnergyName::Lambda => 1e-5,
            _ => 1e-6,
        })
    }
}

/// Everything a run needs, built and checked from a [`ScenarioConfig`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub objective: Objective,
    pub signal: PerturbationSignal,
    pub spec: SystemSpec,
    pub x0: Point,
    pub v0: Option<Point>,
    pub y0: Option<Point>,
    pub warnings: Vec<String>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolves every reference and checks every precondition, before any
    /// integration happens.
    pub fn validate(&self) -> Result<Scenario> {
        if !(self.horizon > self.system.t0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!(
                "horizon must be finite and > t0 = {}, got {}",
                self.system.t0, self.horizon
            )));
        }
        if let Some([lo, hi]) = self.rate_window {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!("rate_window needs 0 < lo < hi, got [{lo}, {hi}]")));
            }
        }
        let objective = self.objective.build()?;
        let n = objective.dimension();
        let signal = self.perturbation.build(n)?;
        let spec = self.system.clone();
        let mut warnings = spec.validate(&objective)?;

        let point = |name: &str, v: &[f64]| -> Result<Point> {
            if v.len() != n {
                return Err(Error::Config(format!(
                    "initial `{name}` has {} entries, objective dimension is {n}",
                    v.len()
                )));
            }
            Ok(Point::from_row_slice(v))
        };
        let x0 = point("x0", &self.initial.x0)?;
        let v0 = self.initial.v0.as_deref().map(|v| point("v0", v)).transpose()?;
        let y0 = self.initial.y0.as_deref().map(|v| point("y0", v)).transpose()?;
        if v0.is_some() == y0.is_some() {
            return Err(Error::Config("initial data needs exactly one of `v0`, `y0`".into()));
        }
        if y0.is_some() && spec.kind.is_heavy_ball() {
            return Err(Error::Config(format!("{} has no first-order state; give `v0`", spec.kind.as_str())));
        }

        match self.integrator.kind {
            IntegratorKind::Rk45 => {
                self.integrator.rk_config()?;
                if spec.kind.is_inclusion() && !objective.is_smooth() {
                    return Err(Error::Config(format!(
                        "{} on a non-smooth objective needs integrator kind `prox`",
                        spec.kind.as_str()
                    )));
                }
                if spec.kind.is_inclusion() {
                    warnings.push(format!(
                        "{} on a smooth objective: integrating its smooth twin with rk45",
                        spec.kind.as_str()
                    ));
                }
            }
            IntegratorKind::Prox => {
                if !(self.integrator.h > 0.0) {
                    return Err(Error::Config(format!("prox step h must be > 0, got {}", self.integrator.h)));
                }
                if spec.kind.is_heavy_ball() {
                    return Err(Error::Config(format!("no prox scheme for {}", spec.kind.as_str())));
                }
                if self.integrator.form == FormChoice::SecondOrder {
                    return Err(Error::Config("the prox schemes run on the first-order state".into()));
                }
                self.integrator.output.resolve(spec.t0, self.horizon)?;
            }
        }
        if self.integrator.form == FormChoice::FirstOrder && spec.kind.is_heavy_ball() {
            return Err(Error::Config(format!("{} has no first-order form", spec.kind.as_str())));
        }
        if self.integrator.form == FormChoice::SecondOrder && y0.is_some() {
            return Err(Error::Config("form `second-order` needs `v0`".into()));
        }

        for &e in &self.energies {
            self.check_energy(e, &spec, &objective)?;
        }
        let mut seen = self.energies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.energies.len() {
            return Err(Error::Config("energies listed more than once".into()));
        }

        Ok(Scenario {
            config: self.clone(),
            objective,
            signal,
            spec,
            x0,
            v0,
            y0,
            warnings,
        })
    }

    fn check_energy(&self, e: EnergyName, spec: &SystemSpec, obj: &Objective) -> Result<()> {
        let explicit = matches!(spec.kind, SystemKind::Isehd | SystemKind::IsehdInclusion);
        let implicit = matches!(spec.kind, SystemKind::Isihd | SystemKind::IsihdInclusion);
        let name = e.as_str();
        let family = |ok: bool, family: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "energy `{name}` applies to {family}, not {}",
                    spec.kind.as_str()
                )))
            }
        };
        let minimizer = || -> Result<()> {
            obj.known_minimizer().map(|_| ()).ok_or(Error::UnknownMinimum)
        };
        let a = spec.alpha;
        match e {
            EnergyName::W => family(explicit, "ISEHD / ISEHD_INCLUSION")?,
            EnergyName::Fast => {
                family(explicit, "ISEHD / ISEHD_INCLUSION")?;
                if !(a > 3.0) {
                    return Err(Error::hypothesis("energy `fast`", "alpha > 3"));
                }
                minimizer()?;
            }
            EnergyName::Eps => {
                family(explicit, "ISEHD / ISEHD_INCLUSION")?;
                if !(a > 3.0) {
                    return Err(Error::hypothesis("energy `eps`", "alpha > 3"));
                }
                let eps = self.energy_params.eps(a);
                if !(eps > 0.0 && eps < a - 3.0) {
                    return Err(Error::Config(format!("eps must lie in ]0, {}[, got {eps}", a - 3.0)));
                }
                minimizer()?;
            }
            EnergyName::Lambda => {
                family(explicit, "ISEHD / ISEHD_INCLUSION")?;
                if !(a >= 3.0) {
                    return Err(Error::hypothesis("energy `lambda`", "alpha >= 3"));
                }
                let l = self.energy_params.lambda();
                if !(l >= 2.0 && l <= a - 1.0) {
                    return Err(Error::Config(format!("lambda must lie in [2, {}], got {l}", a - 1.0)));
                }
                minimizer()?;
            }
            EnergyName::Sc => {
                family(spec.kind.is_heavy_ball(), "HB_EXPLICIT / HB_IMPLICIT")?;
                if !(obj.mu() > 0.0) {
                    return Err(Error::hypothesis("energy `sc`", "mu > 0"));
                }
                minimizer()?;
            }
            EnergyName::ImplicitConvex => {
                family(implicit, "ISIHD / ISIHD_INCLUSION")?;
                implicit_coefficients(a, self.energy_params.b(a), spec.gamma, spec.beta)?;
                minimizer()?;
            }
        }
        if let Some(t) = self.energy_params.monotone_tol {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("monotone_tol must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}
