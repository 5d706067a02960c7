//! Sampled solution records.

use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::objectives::{Objective, Point};

/// What the second state block of a trajectory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateForm {
    /// `(x, ẋ)` from a second-order integration.
    Velocity,
    /// `(x, y)` from a first-order or inclusion integration.
    Auxiliary,
}

/// An immutable sampled run.
///
/// `velocity` is always populated: for `Velocity` runs it equals the
/// companion, otherwise it is recovered from the first-order equation for
/// `x`. `xi` holds subgradients for inclusion runs (`xi[i] ∈ ∂f(x[i])`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: SystemSpec,
    pub form: StateForm,
    pub times: Vec<f64>,
    pub x: Vec<Point>,
    pub companion: Vec<Point>,
    pub velocity: Vec<Point>,
    pub xi: Option<Vec<Point>>,
    pub f_gap: Option<Vec<f64>>,
    pub grad_norm: Vec<f64>,
}

impl Trajectory {
    /// Assembles a trajectory and fills the `f_gap`/`grad_norm` diagnostics.
    /// `f_bar` overrides the objective's known minimum value.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        spec: SystemSpec,
        form: StateForm,
        times: Vec<f64>,
        x: Vec<Point>,
        companion: Vec<Point>,
        velocity: Vec<Point>,
        xi: Option<Vec<Point>>,
        obj: &Objective,
        f_bar: Option<f64>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, found: 0 });
        }
        for len in [x.len(), companion.len(), velocity.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if let Some(xi) = &xi {
            if xi.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: xi.len() });
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
        let f_bar = f_bar.or(obj.known_min_value());
        let f_gap = match f_bar {
            Some(fb) => Some(x.iter().map(|p| obj.value(p).map(|v| v - fb)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let grad_norm = match &xi {
            Some(xi) => xi.iter().map(|g| g.norm()).collect(),
            None => x
                .iter()
                .map(|p| obj.gradient(p).map(|g| g.norm()))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Trajectory {
            spec,
            form,
            times,
            x,
            companion,
            velocity,
            xi,
            f_gap,
            grad_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.x.first().map_or(0, |p| p.len())
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// `∇f(x_i)` for smooth runs, the stored subgradient for inclusion runs.
    pub fn subgradients(&self, obj: &Objective) -> Result<Vec<Point>> {
        match &self.xi {
            Some(xi) => Ok(xi.clone()),
            None => self.x.iter().map(|p| obj.gradient(p)).collect(),
        }
    }

    /// `‖x_i − x*‖` per sample.
    pub fn distance_to(&self, xstar: &Point) -> Vec<f64> {
        self.x.iter().map(|p| (p - xstar).norm()).collect()
    }

    /// The samples whose indices are listed, in order.
    pub fn select(&self, indices: &[usize]) -> Trajectory {
        let pick = |v: &Vec<Point>| indices.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        Trajectory {
            spec: self.spec.clone(),
            form: self.form,
            times: indices.iter().map(|&i| self.times[i]).collect(),
            x: pick(&self.x),
            companion: pick(&self.companion),
            velocity: pick(&self.velocity),
            xi: self.xi.as_ref().map(pick),
            f_gap: self.f_gap.as_ref().map(|g| indices.iter().map(|&i| g[i]).collect()),
            grad_norm: indices.iter().map(|&i| self.grad_norm[i]).collect(),
        }
    }

    /// Samples with `times ≤ t_end`.
    pub fn truncate(&self, t_end: f64) -> Trajectory {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.times[i] <= t_end).collect();
        self.select(&idx)
    }

    /// For each target time, the index of the nearest sample, deduplicated.
    pub fn nearest_indices(&self, targets: &[f64]) -> Vec<usize> {
        nearest_indices(&self.times, targets)
    }
}

/// Index of the nearest entry of the increasing `times` for each target,
/// with consecutive duplicates removed.
pub fn nearest_indices(times: &[f64], targets: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(targets.len());
    let mut j = 0;
    for &t in targets {
        while j + 1 < times.len() && (times[j + 1] - t).abs() <= (times[j] - t).abs() {
            j += 1;
        }
        if out.last() != Some(&j) {
            out.push(j);
        }
    }
    out
}

/// `n` equally spaced points on `[a, b]`, endpoints included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + i as f64 * h })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(1.0, 50.0, 2000);
        assert_eq!(g.len(), 2000);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[1999], 50.0);
    }

    #[test]
    fn nearest_snapping() {
        let times = [0.0, 0.1, 0.2, 0.3, 0.4];
        assert_eq!(nearest_indices(&times, &[0.0, 0.14, 0.16, 0.4]), vec![0, 1, 2, 4]);
        assert_eq!(nearest_indices(&times, &[0.0, 0.01, 0.02]), vec![0]);
    }
}
