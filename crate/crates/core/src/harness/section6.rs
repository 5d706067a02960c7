//! The 12-run experiment grid on the quartic: smooth ISEHD/ISIHD and their
//! inclusions on the ℓ₁-regularized quartic, each at δ ∈ {0.1, 1.1, 3.1}.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::dynamics::{SystemKind, SystemSpec};
use crate::error::Result;

use super::config::{
    EnergyName, EnergyParams, InitialData, IntegratorSection, ObjectiveConfig, PerturbationConfig, ScenarioConfig,
};
use super::output::{fmt_f64, write_artifacts};
use super::run::{run_scenario, RunReport};

pub const DELTAS: [f64; 3] = [0.1, 1.1, 3.1];
pub const HORIZON: f64 = 50.0;
pub const RATE_WINDOW: [f64; 2] = [10.0, 50.0];
pub const X0: [f64; 2] = [-10.0, 20.0];
pub const V0: [f64; 2] = [5.0, -5.0];
pub const L1_WEIGHT: f64 = 0.1;
pub const PROX_STEP: f64 = 1e-3;

/// The scenario for one cell of the grid.
pub fn section6_config(kind: SystemKind, delta: f64) -> ScenarioConfig {
    let system = match kind {
        SystemKind::Isehd | SystemKind::IsehdInclusion => SystemSpec::isehd(3.1, 1.0).with_kind(kind),
        _ => SystemSpec::isihd(3.1, 1.0, 1.0).with_kind(kind),
    };
    let (objective, integrator) = if kind.is_inclusion() {
        (ObjectiveConfig::quartic_l1(L1_WEIGHT), IntegratorSection::prox(PROX_STEP))
    } else {
        (ObjectiveConfig::quartic(), IntegratorSection::default())
    };
    let energies = match kind {
        SystemKind::Isehd => vec![EnergyName::W, EnergyName::Fast, EnergyName::Eps],
        SystemKind::Isihd => vec![EnergyName::ImplicitConvex],
        SystemKind::IsehdInclusion => vec![EnergyName::Lambda],
        _ => vec![],
    };
    ScenarioConfig {
        horizon: HORIZON,
        out: None,
        energies,
        rate_window: Some(RATE_WINDOW),
        objective,
        system,
        perturbation: PerturbationConfig::cosine_decay(delta),
        integrator,
        initial: InitialData::velocity(X0.to_vec(), V0.to_vec()),
        energy_params: EnergyParams {
            eps: Some(0.05),
            ..EnergyParams::default()
        },
    }
}

pub const SYSTEMS: [SystemKind; 4] = [
    SystemKind::Isehd,
    SystemKind::Isihd,
    SystemKind::IsehdInclusion,
    SystemKind::IsihdInclusion,
];

/// `(run name, config)` for all 12 runs in a fixed order.
pub fn section6_grid() -> Vec<(String, ScenarioConfig)> {
    SYSTEMS
        .iter()
        .flat_map(|&k| {
            DELTAS
                .iter()
                .map(move |&d| (format!("{}_delta{d}", k.as_str().to_lowercase()), section6_config(k, d)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Section6Row {
    pub name: String,
    pub kind: SystemKind,
    pub delta: f64,
    pub report: RunReport,
}

impl Section6Row {
    pub fn slope(&self) -> Option<f64> {
        self.report.rate.as_ref().ok().map(|r| r.slope)
    }
}

#[derive(Debug, Clone)]
pub struct Section6Report {
    pub rows: Vec<Section6Row>,
}

impl Section6Report {
    pub fn row(&self, kind: SystemKind, delta: f64) -> Option<&Section6Row> {
        self.rows.iter().find(|r| r.kind == kind && r.delta == delta)
    }

    /// `comparison.csv` contents.
    pub fn comparison_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "system",
            "objective",
            "delta",
            "route",
            "f_bar",
            "slope_f_gap",
            "classification",
            "f_gap_final",
            "dist_final",
            "integrability",
            "energy_violations",
            "certified",
        ])?;
        for r in &self.rows {
            let rep = &r.report;
            let tr = &rep.trajectory;
            let last = tr.len() - 1;
            let gap = tr.f_gap.as_ref().map(|g| fmt_f64(g[last])).unwrap_or_default();
            let dist = rep
                .xstar
                .as_ref()
                .map(|xs| fmt_f64((&tr.x[last] - xs).norm()))
                .unwrap_or_default();
            let (slope, class) = match &rep.rate {
                Ok(rt) => (fmt_f64(rt.slope), rt.classification.as_str().to_string()),
                Err(_) => (String::new(), "unavailable".into()),
            };
            let viol = rep
                .energies
                .iter()
                .map(|e| format!("{}:{}", e.name.as_str(), e.trace.violations.len()))
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([
                r.name.clone(),
                r.kind.as_str().into(),
                rep.scenario.objective.name().into(),
                fmt_f64(r.delta),
                rep.route.clone(),
                rep.f_bar.map(fmt_f64).unwrap_or_default(),
                slope,
                class,
                gap,
                dist,
                rep.integrability.1.as_str().into(),
                viol,
                rep.certified().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One table per system with `f_gap` and `dist` for every δ side by
    /// side; the runs of one system share their output grid.
    pub fn figure_csv(&self, kind: SystemKind) -> Result<Option<String>> {
        let rows: Vec<&Section6Row> = self.rows.iter().filter(|r| r.kind == kind).collect();
        let Some(first) = rows.first() else {
            return Ok(None);
        };
        let times = &first.report.trajectory.times;
        if rows.iter().any(|r| r.report.trajectory.times != *times) {
            return Ok(None);
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        for r in &rows {
            header.push(format!("f_gap_delta{}", r.delta));
        }
        for r in &rows {
            header.push(format!("dist_delta{}", r.delta));
        }
        w.write_record(&header)?;
        let dists: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| match &r.report.xstar {
                Some(xs) => r.report.trajectory.distance_to(xs),
                None => vec![f64::NAN; times.len()],
            })
            .collect();
        for i in 0..times.len() {
            let mut rec = vec![fmt_f64(times[i])];
            for r in &rows {
                rec.push(r.report.trajectory.f_gap.as_ref().map(|g| fmt_f64(g[i])).unwrap_or_default());
            }
            for d in &dists {
                rec.push(fmt_f64(d[i]));
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(Some(String::from_utf8(bytes).expect("csv output is utf-8")))
    }
}

/// Runs the grid concurrently. With `out = Some(dir)` each run writes into
/// `dir/<run name>/`, and `comparison.csv` plus `figure_<system>.csv` go
/// into `dir`.
pub fn reproduce_section6(out: Option<&Path>) -> Result<Section6Report> {
    let grid = section6_grid();
    let rows = grid
        .into_par_iter()
        .map(|(name, cfg)| -> Result<Section6Row> {
            let kind = cfg.system.kind;
            let delta = cfg.perturbation.delta.expect("cosine decay");
            let report = run_scenario(&cfg)?;
            if let Some(dir) = out {
                write_artifacts(&report, &dir.join(&name))?;
            }
            Ok(Section6Row {
                name,
                kind,
                delta,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = Section6Report { rows };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("comparison.csv"), report.comparison_csv()?)?;
        for k in SYSTEMS {
            if let Some(s) = report.figure_csv(k)? {
                fs::write(dir.join(format!("figure_{}.csv", k.as_str().to_lowercase())), s)?;
            }
        }
    }
    Ok(report)
}
