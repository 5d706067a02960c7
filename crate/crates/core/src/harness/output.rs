//! CSV and plot-script emission.
//!
//! Numbers are written in shortest round-trip form, so identical runs give
//! byte-identical files.

use std::fs;
use std::path::Path;

use crate::analysis::RateReport;
use crate::error::{Error, Result};
use crate::trajectory::StateForm;

use super::run::RunReport;

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn trajectory_header(dimension: usize, form: StateForm, with_gap: bool, with_dist: bool) -> Vec<String> {
    let c = match form {
        StateForm::Velocity => "v",
        StateForm::Auxiliary => "y",
    };
    let mut h = vec!["t".to_string()];
    h.extend((1..=dimension).map(|i| format!("x{i}")));
    h.extend((1..=dimension).map(|i| format!("{c}{i}")));
    if with_gap {
        h.push("f_gap".into());
    }
    h.push("grad_norm".into());
    if with_dist {
        h.push("dist".into());
    }
    h
}

fn write_trajectory(report: &RunReport, path: &Path) -> Result<()> {
    let tr = &report.trajectory;
    let dist = report.xstar.as_ref().map(|xs| tr.distance_to(xs));
    let mut w = writer(path)?;
    w.write_record(trajectory_header(tr.dimension(), tr.form, tr.f_gap.is_some(), dist.is_some()))?;
    for i in 0..tr.len() {
        let mut row = vec![fmt_f64(tr.times[i])];
        row.extend(tr.x[i].iter().map(|&v| fmt_f64(v)));
        row.extend(tr.companion[i].iter().map(|&v| fmt_f64(v)));
        if let Some(g) = &tr.f_gap {
            row.push(fmt_f64(g[i]));
        }
        row.push(fmt_f64(tr.grad_norm[i]));
        if let Some(d) = &dist {
            row.push(fmt_f64(d[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_energies(report: &RunReport, dir: &Path) -> Result<()> {
    for e in &report.energies {
        let mut w = writer(&dir.join(format!("energy_{}.csv", e.name.as_str())))?;
        w.write_record(["t", "value", "tail_integral"])?;
        for i in 0..e.trace.times.len() {
            w.write_record([
                fmt_f64(e.trace.times[i]),
                fmt_f64(e.trace.values[i]),
                fmt_f64(e.trace.tail_integrals[i]),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Rows of `report.csv`: `check, subject, value, status, detail`.
pub fn report_rows(report: &RunReport) -> Vec<[String; 5]> {
    let mut rows = Vec::new();
    rows.push([
        "route".into(),
        report.trajectory.spec.kind.as_str().into(),
        String::new(),
        report.route.clone(),
        String::new(),
    ]);
    if let Some(fb) = report.f_bar {
        let how = if report.scenario.objective.nonsmooth_weight() > 0.0 {
            "prox-gradient polish"
        } else {
            "closed form"
        };
        rows.push(["reference".into(), "f_bar".into(), fmt_f64(fb), how.into(), String::new()]);
    }
    match &report.rate {
        Ok(r) => rows.push([
            "rate".into(),
            "f_gap".into(),
            fmt_f64(r.slope),
            r.classification.as_str().into(),
            format!(
                "window=[{}, {}] intercept={} residual_rms={}",
                fmt_f64(r.window.0),
                fmt_f64(r.window.1),
                fmt_f64(r.intercept),
                fmt_f64(r.residual_rms)
            ),
        ]),
        Err(m) => rows.push(["rate".into(), "f_gap".into(), String::new(), "unavailable".into(), m.clone()]),
    }
    let (p, class) = report.integrability;
    rows.push([
        "integrability".into(),
        format!("p={p}"),
        String::new(),
        class.as_str().into(),
        String::new(),
    ]);
    for e in &report.energies {
        rows.push([
            "monotonicity".into(),
            e.name.as_str().into(),
            e.trace.violations.len().to_string(),
            if e.bound.is_some() {
                "info".into()
            } else {
                pass(e.certified).into()
            },
            format!("t1={} rel_tol={}", fmt_f64(e.trace.t1), fmt_f64(e.tolerance)),
        ]);
        if let Some(b) = &e.bound {
            rows.push([
                "bound".into(),
                e.name.as_str().into(),
                fmt_f64(b.min_slack),
                pass(b.holds).into(),
                format!("tolerance={} M={}", fmt_f64(b.tolerance), fmt_f64(b.m_constant)),
            ]);
        }
    }
    rows.push([
        "certified".into(),
        String::new(),
        String::new(),
        pass(report.certified()).into(),
        String::new(),
    ]);
    for n in &report.notes {
        rows.push(["note".into(), String::new(), String::new(), String::new(), n.clone()]);
    }
    rows
}

fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["check", "subject", "value", "status", "detail"])?;
    for r in report_rows(report) {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn plot_script(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script; run from this directory\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n\n");
    if report.trajectory.f_gap.is_some() {
        s.push_str("set output 'f_gap.png'\nset logscale xy\nset xlabel 't'\nset ylabel 'f(x(t)) - f_bar'\n");
        s.push_str("plot 'trajectory.csv' using 't':'f_gap' with lines\n\n");
    }
    if report.xstar.is_some() {
        s.push_str("set output 'dist.png'\nunset logscale\nset logscale y\nset xlabel 't'\nset ylabel '|x(t) - x*|'\n");
        s.push_str("plot 'trajectory.csv' using 't':'dist' with lines\n\n");
    }
    for e in &report.energies {
        let n = e.name.as_str();
        s.push_str(&format!(
            "set output 'energy_{n}.png'\nunset logscale\nset xlabel 't'\nset ylabel 'energy {n}'\n"
        ));
        s.push_str(&format!("plot 'energy_{n}.csv' using 't':'value' with lines\n\n"));
    }
    s
}

/// Writes `trajectory.csv`, `energy_<name>.csv`, `report.csv`, `plot.gp`
/// and the scenario itself as `scenario.toml` into `dir`.
pub fn write_artifacts(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory(report, &dir.join("trajectory.csv"))?;
    write_energies(report, dir)?;
    write_report(report, &dir.join("report.csv"))?;
    fs::write(dir.join("plot.gp"), plot_script(report))?;
    fs::write(dir.join("scenario.toml"), report.scenario.config.to_toml_string()?)?;
    Ok(())
}

/// Reads the `t` column and the named column of a CSV with a header row.
pub fn read_csv_column(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: no column `{name}`", path.display())))
    };
    let (it, ic) = (find("t")?, find(column)?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                Error::Config(format!("{}: row {}: bad number in column {i}", path.display(), line + 2))
            })
        };
        times.push(parse(it)?);
        values.push(parse(ic)?);
    }
    Ok((times, values))
}

pub const RATE_HEADER: [&str; 8] = [
    "column",
    "t_lo",
    "t_hi",
    "slope",
    "intercept",
    "residual_rms",
    "samples",
    "classification",
];

/// One CSV row (after [`RATE_HEADER`]) for a rate fit.
pub fn rate_row(column: &str, r: &RateReport) -> [String; 8] {
    [
        column.to_string(),
        fmt_f64(r.window.0),
        fmt_f64(r.window.1),
        fmt_f64(r.slope),
        fmt_f64(r.intercept),
        fmt_f64(r.residual_rms),
        r.samples.to_string(),
        r.classification.as_str().to_string(),
    ]
}
