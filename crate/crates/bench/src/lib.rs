//! Fixtures shared by the benchmarks.

use hdamp_core::dynamics::{lift_initial, SystemKind, SystemSpec};
use hdamp_core::{Objective, PerturbationSignal, Point, Result};

/// One benchmark problem: the quartic grid setup on `[1, horizon]`.
pub struct Problem {
    pub spec: SystemSpec,
    pub objective: Objective,
    pub signal: PerturbationSignal,
    pub horizon: f64,
    pub x0: Point,
    pub v0: Point,
}

impl Problem {
    pub fn quartic(kind: SystemKind, delta: f64, horizon: f64) -> Result<Self> {
        let spec = match kind {
            SystemKind::Isehd | SystemKind::IsehdInclusion => SystemSpec::isehd(3.1, 1.0).with_kind(kind),
            _ => SystemSpec::isihd(3.1, 1.0, 1.0).with_kind(kind),
        };
        let objective = if kind.is_inclusion() {
            Objective::quartic_l1(0.1)
        } else {
            Objective::quartic()
        };
        Ok(Problem {
            spec,
            objective,
            signal: PerturbationSignal::cosine_decay(delta, 2)?,
            horizon,
            x0: Point::from_row_slice(&[-10.0, 20.0]),
            v0: Point::from_row_slice(&[5.0, -5.0]),
        })
    }

    /// `(x0, y0)` of the first-order form.
    pub fn lifted(&self) -> Result<(Point, Point)> {
        lift_initial(&self.spec, &self.objective, &self.signal, &self.x0, &self.v0)
    }
}
