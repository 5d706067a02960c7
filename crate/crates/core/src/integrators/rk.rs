//! Dormand–Prince 5(4) with a PI step-size controller and the pair's
//! continuous extension for output at prescribed times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Point;

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer's DOPRI5 defaults)
const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - PI_BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Where the solver reports the solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutputGrid {
    /// Every accepted step.
    #[default]
    Adaptive,
    /// `n` equally spaced times over the span, endpoints included.
    Uniform { n: usize },
    /// Explicit increasing times inside the span.
    Times { times: Vec<f64> },
}

impl OutputGrid {
    pub fn resolve(&self, t0: f64, t1: f64) -> Result<Option<Vec<f64>>> {
        match self {
            OutputGrid::Adaptive => Ok(None),
            OutputGrid::Uniform { n } => {
                if *n < 2 {
                    return Err(Error::InvalidParameter(format!("uniform output needs n >= 2, got {n}")));
                }
                Ok(Some(crate::trajectory::uniform_grid(t0, t1, *n)))
            }
            OutputGrid::Times { times } => {
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("output times must be strictly increasing".into()));
                }
                if times.first().is_some_and(|&a| a < t0) || times.last().is_some_and(|&b| b > t1) {
                    return Err(Error::InvalidParameter("output times must lie inside the span".into()));
                }
                Ok(Some(times.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub output: OutputGrid,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.1,
            output: OutputGrid::Adaptive,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_output(mut self, output: OutputGrid) -> Self {
        self.output = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        if !(0.0 < self.h_min && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        Ok(())
    }
}

/// Raw solver output: sampled states plus work counters.
#[derive(Debug, Clone)]
pub struct RkSolution {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

fn all_finite(v: &Point) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `ż = rhs(t, z)` over `t_span`.
pub fn integrate_rk<F>(mut rhs: F, t_span: (f64, f64), init: &Point, cfg: &IntegratorConfig) -> Result<RkSolution>
where
    F: FnMut(f64, &Point) -> Result<Point>,
{
    cfg.validate()?;
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!("need T > t0, got [{t0}, {t_end}]")));
    }
    let grid = cfg.output.resolve(t0, t_end)?;
    let mut evals = 0usize;
    let mut f = |t: f64, z: &Point| -> Result<Point> {
        evals += 1;
        let out = rhs(t, z)?;
        if out.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), found: out.len() });
        }
        if !all_finite(&out) {
            return Err(Error::NonFinite { t });
        }
        Ok(out)
    };

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut next_out = 0usize;
    let emit_grid = |times: &mut Vec<f64>, states: &mut Vec<Point>, next: &mut usize, upto: f64, interp: &dyn Fn(f64) -> Point| {
        if let Some(g) = &grid {
            while *next < g.len() && g[*next] <= upto {
                times.push(g[*next]);
                states.push(interp(g[*next]));
                *next += 1;
            }
        }
    };

    let mut t = t0;
    let mut y = init.clone();
    let mut k1 = f(t, &y)?;
    if grid.is_none() {
        times.push(t);
        states.push(y.clone());
    } else {
        let y0 = y.clone();
        emit_grid(&mut times, &mut states, &mut next_out, t0, &|_| y0.clone());
    }

    let mut h = cfg.h_init.min(t_end - t0);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let (mut accepted, mut rejected) = (0usize, 0usize);

    while t < t_end {
        let last = t + h >= t_end || (t_end - (t + h)) < 1e-12 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        if h < cfg.h_min && !last {
            return Err(Error::StepUnderflow { t, h });
        }
        let k2 = f(t + C2 * h, &(&y + h * A21 * &k1))?;
        let k3 = f(t + C3 * h, &(&y + h * (A31 * &k1 + A32 * &k2)))?;
        let k4 = f(t + C4 * h, &(&y + h * (A41 * &k1 + A42 * &k2 + A43 * &k3)))?;
        let k5 = f(t + C5 * h, &(&y + h * (A51 * &k1 + A52 * &k2 + A53 * &k3 + A54 * &k4)))?;
        let k6 = f(
            t + h,
            &(&y + h * (A61 * &k1 + A62 * &k2 + A63 * &k3 + A64 * &k4 + A65 * &k5)),
        )?;
        let y_new = &y + h * (A71 * &k1 + A73 * &k3 + A74 * &k4 + A75 * &k5 + A76 * &k6);
        if !all_finite(&y_new) {
            return Err(Error::NonFinite { t: t + h });
        }
        let k7 = f(t + h, &y_new)?;
        let err_vec = h * (E1 * &k1 + E3 * &k3 + E4 * &k4 + E5 * &k5 + E6 * &k6 + E7 * &k7);

        let n = y.len().max(1) as f64;
        let err = (err_vec
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let sk = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
                (e / sk).powi(2)
            })
            .sum::<f64>()
            / n)
            .sqrt();

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(cfg.h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);

            if grid.is_some() {
                let ydiff = &y_new - &y;
                let c2 = h * &k1 - &ydiff;
                let c3 = &ydiff - h * &k7 - &c2;
                let c4 = h * (D1 * &k1 + D3 * &k3 + D4 * &k4 + D5 * &k5 + D6 * &k6 + D7 * &k7);
                let (ys, tt, hh) = (&y, t, h);
                let interp = |s: f64| -> Point {
                    let th = (s - tt) / hh;
                    let th1 = 1.0 - th;
                    ys + th * (&ydiff + th1 * (&c2 + th * (&c3 + th1 * &c4)))
                };
                let upto = if last { t_end } else { t + h };
                emit_grid(&mut times, &mut states, &mut next_out, upto, &interp);
            }
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            if grid.is_none() {
                times.push(t);
                states.push(y.clone());
            }
            accepted += 1;
            last_rejected = false;
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            rejected += 1;
            last_rejected = true;
            if h < cfg.h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    if let Some(g) = &grid {
        // round-off can leave the final grid point marginally past t_end
        while next_out < g.len() {
            times.push(g[next_out]);
            states.push(y.clone());
            next_out += 1;
        }
    }
    Ok(RkSolution {
        times,
        states,
        accepted,
        rejected,
        rhs_evals: evals,
    })
}

/// Classical fixed-step RK4, used as an independent reference.
pub fn integrate_rk4_fixed<F>(mut rhs: F, t_span: (f64, f64), init: &Point, h: f64) -> Result<RkSolution>
where
    F: FnMut(f64, &Point) -> Result<Point>,
{
    let (t0, t_end) = t_span;
    if !(h > 0.0) || !(t_end > t0) {
        return Err(Error::InvalidParameter("need h > 0 and T > t0".into()));
    }
    let steps = ((t_end - t0) / h).round().max(1.0) as usize;
    let h = (t_end - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = init.clone();
    times.push(t0);
    states.push(y.clone());
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = rhs(t, &y)?;
        let k2 = rhs(t + 0.5 * h, &(&y + 0.5 * h * &k1))?;
        let k3 = rhs(t + 0.5 * h, &(&y + 0.5 * h * &k2))?;
        let k4 = rhs(t + h, &(&y + h * &k3))?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !all_finite(&y) {
            return Err(Error::NonFinite { t: t + h });
        }
        times.push(if k + 1 == steps { t_end } else { t0 + (k + 1) as f64 * h });
        states.push(y.clone());
    }
    Ok(RkSolution {
        times,
        states,
        accepted: steps,
        rejected: 0,
        rhs_evals: 4 * steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator(_t: f64, z: &Point) -> Result<Point> {
        Ok(Point::from_row_slice(&[z[1], -z[0]]))
    }

    #[test]
    fn harmonic_oscillator_half_period() {
        let cfg = IntegratorConfig::default().with_output(OutputGrid::Times { times: vec![PI] });
        let sol = integrate_rk(oscillator, (0.0, PI), &Point::from_row_slice(&[1.0, 0.0]), &cfg).unwrap();
        assert_eq!(sol.times, vec![PI]);
        assert!((sol.states[0][0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_solution_is_exact() {
        let c = Point::from_row_slice(&[3.25, -7.5]);
        let sol = integrate_rk(|_, z: &Point| Ok(Point::zeros(z.len())), (0.0, 10.0), &c, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(sol.states.last().unwrap(), &c);
    }

    #[test]
    fn exponential_decay() {
        let cfg = IntegratorConfig::default();
        let sol = integrate_rk(|_, z: &Point| Ok(-z), (0.0, 1.0), &Point::from_row_slice(&[1.0]), &cfg).unwrap();
        assert_eq!(*sol.times.last().unwrap(), 1.0);
        assert!((sol.states.last().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_tracks_closed_form() {
        let cfg = IntegratorConfig::default().with_output(OutputGrid::Uniform { n: 101 });
        let sol = integrate_rk(oscillator, (0.0, 2.0 * PI), &Point::from_row_slice(&[1.0, 0.0]), &cfg).unwrap();
        assert_eq!(sol.times.len(), 101);
        for (t, z) in sol.times.iter().zip(&sol.states) {
            assert!((z[0] - t.cos()).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |tol: f64| {
            let mut cfg = IntegratorConfig::default().with_tolerances(tol, tol);
            // the default h_max = 0.1 would cap the step before the tolerance binds
            cfg.h_max = 1.0;
            let sol = integrate_rk(oscillator, (0.0, PI), &Point::from_row_slice(&[1.0, 0.0]), &cfg).unwrap();
            (sol.states.last().unwrap()[0] + 1.0).abs()
        };
        for tol in [1e-5, 1e-6, 1e-7] {
            let coarse = run(tol);
            let fine = run(tol / 10.0);
            assert!(coarse >= 5.0 * fine, "{tol}: {coarse} vs {fine}");
        }
    }

    #[test]
    fn blow_up_reports_failure() {
        let cfg = IntegratorConfig::default();
        let r = integrate_rk(|_, z: &Point| Ok(z.map(|v| v * v)), (0.0, 2.0), &Point::from_row_slice(&[1.0]), &cfg);
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::NonFinite { .. })));
    }

    #[test]
    fn config_validation() {
        let cfg = IntegratorConfig {
            h_min: 1.0,
            ..IntegratorConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(OutputGrid::Uniform { n: 1 }.resolve(0.0, 1.0).is_err());
    }

    #[test]
    fn fixed_rk4_reference() {
        let sol = integrate_rk4_fixed(|_, z: &Point| Ok(-z), (0.0, 1.0), &Point::from_row_slice(&[1.0]), 1e-2).unwrap();
        assert!((sol.states.last().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }
}
