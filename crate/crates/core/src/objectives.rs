//! Separable convex test objectives.
//!
//! An [`Objective`] is a sum of one-dimensional convex terms, one per
//! coordinate, plus an optional `w·‖x‖₁` term. Separability makes the
//! proximal map exact and dimension independent: each coordinate is solved
//! on its own, either in closed form or by a safeguarded Newton iteration.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

/// Half-width of the box `[-R, R]^n` on which sampled invariants and the
/// gradient Lipschitz constants of the built-ins are stated.
pub const WORKING_BOX: f64 = 20.0;

const PROX_MAX_ITER: usize = 100;

/// A convex function of one real variable.
///
/// Implementors must be convex. `second_derivative` returns `None` when the
/// term is not twice differentiable; the objective then reports that
/// Hessian-vector products are unavailable.
pub trait CoordinateFn: Send + Sync + fmt::Debug {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
    fn second_derivative(&self, u: f64) -> Option<f64>;

    /// `argmin_u φ(u) + (u - v)² / (2s)`.
    ///
    /// The default solves `φ'(u) + (u - v)/s = 0` by safeguarded Newton.
    fn prox(&self, v: f64, s: f64) -> Result<f64> {
        let lo = v - 1.0;
        let hi = v + 1.0;
        scalar_prox_newton(self, v, s, (lo, hi))
    }
}

/// `(k/2)(u - c)²`. `k = 0` gives the zero function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub curvature: f64,
    pub center: f64,
}

impl CoordinateFn for Quadratic {
    fn value(&self, u: f64) -> f64 {
        0.5 * self.curvature * (u - self.center).powi(2)
    }

    fn derivative(&self, u: f64) -> f64 {
        self.curvature * (u - self.center)
    }

    fn second_derivative(&self, _u: f64) -> Option<f64> {
        Some(self.curvature)
    }

    fn prox(&self, v: f64, s: f64) -> Result<f64> {
        Ok((v + s * self.curvature * self.center) / (1.0 + s * self.curvature))
    }
}

/// `(u - c)⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    pub center: f64,
}

impl CoordinateFn for Quartic {
    fn value(&self, u: f64) -> f64 {
        (u - self.center).powi(4)
    }

    fn derivative(&self, u: f64) -> f64 {
        4.0 * (u - self.center).powi(3)
    }

    fn second_derivative(&self, u: f64) -> Option<f64> {
        Some(12.0 * (u - self.center).powi(2))
    }

    fn prox(&self, v: f64, s: f64) -> Result<f64> {
        let c = self.center;
        scalar_prox_newton(self, v, s, (v.min(c) - 1.0, v.max(c) + 1.0))
    }
}

/// Solves `φ'(u) + (u - v)/s = 0` on a bracket with Newton steps, falling
/// back to bisection whenever a Newton iterate leaves the current bracket.
///
/// The bracket is widened geometrically if it does not contain a sign
/// change; for convex `φ` the residual is strictly increasing so a root
/// always exists.
pub fn scalar_prox_newton<F: CoordinateFn + ?Sized>(
    phi: &F,
    v: f64,
    s: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let residual = |u: f64| phi.derivative(u) + (u - v) / s;
    let (mut lo, mut hi) = bracket;
    let mut width = (hi - lo).max(1.0);
    let mut widen = 0;
    while residual(lo) > 0.0 {
        lo -= width;
        width *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(Error::ProxNonConvergence { iterations: widen, v, s });
        }
    }
    while residual(hi) < 0.0 {
        hi += width;
        width *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(Error::ProxNonConvergence { iterations: widen, v, s });
        }
    }

    let mut u = v.clamp(lo, hi);
    for _ in 0..PROX_MAX_ITER {
        let r = residual(u);
        let scale = phi.derivative(u).abs() + ((u - v) / s).abs() + 1.0;
        let slope = phi.second_derivative(u).unwrap_or(0.0) + 1.0 / s;
        if r.abs() <= 1e-12 * scale {
            // one more Newton step is nearly free and squares the error
            let polished = u - r / slope;
            return Ok(if polished >= lo && polished <= hi { polished } else { u });
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        if hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            return Ok(0.5 * (lo + hi));
        }
        let newton = u - r / slope;
        u = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::ProxNonConvergence {
        iterations: PROX_MAX_ITER,
        v,
        s,
    })
}

/// `f(x) = Σ φᵢ(xᵢ) + w‖x‖₁` with convexity metadata.
#[derive(Clone)]
pub struct Objective {
    name: String,
    terms: Vec<Arc<dyn CoordinateFn>>,
    l1_weight: f64,
    mu: f64,
    lipschitz_grad: Option<f64>,
    minimizer: Option<Point>,
    min_value: Option<f64>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dimension", &self.terms.len())
            .field("l1_weight", &self.l1_weight)
            .field("mu", &self.mu)
            .finish()
    }
}

impl Objective {
    /// Builds a user objective from per-coordinate terms.
    pub fn separable(
        name: impl Into<String>,
        terms: Vec<Arc<dyn CoordinateFn>>,
        l1_weight: f64,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("objective needs at least one coordinate".into()));
        }
        if !(l1_weight >= 0.0) {
            return Err(Error::InvalidParameter(format!("l1 weight must be >= 0, got {l1_weight}")));
        }
        Ok(Objective {
            name: name.into(),
            terms,
            l1_weight,
            mu: 0.0,
            lipschitz_grad: None,
            minimizer: None,
            min_value: None,
        })
    }

    /// `(x₁ - 1)⁴ + (x₂ - 5)²`, minimized at `(1, 5)` with value 0.
    pub fn quartic() -> Self {
        let mut obj = Self::quartic_terms("quartic", 0.0);
        obj.minimizer = Some(Point::from_vec(vec![1.0, 5.0]));
        obj.min_value = Some(0.0);
        obj
    }

    /// `(x₁ - 1)⁴ + (x₂ - 5)² + w(|x₁| + |x₂|)`. The minimizer is not
    /// recorded; see [`crate::harness::polish_minimizer`].
    pub fn quartic_l1(weight: f64) -> Self {
        Self::quartic_terms("quartic-l1", weight)
    }

    fn quartic_terms(name: &str, weight: f64) -> Self {
        // largest |x₁ - 1| on the working box is 21
        let l = 12.0 * (WORKING_BOX + 1.0).powi(2);
        Objective {
            name: name.into(),
            terms: vec![
                Arc::new(Quartic { center: 1.0 }),
                Arc::new(Quadratic {
                    curvature: 2.0,
                    center: 5.0,
                }),
            ],
            l1_weight: weight,
            mu: 0.0,
            lipschitz_grad: Some(l),
            minimizer: None,
            min_value: None,
        }
    }

    /// `(μ/2)‖x - x*‖²`.
    pub fn quadratic_sc(mu: f64, xstar: Point) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("quadratic-sc needs mu > 0, got {mu}")));
        }
        if xstar.is_empty() {
            return Err(Error::InvalidParameter("quadratic-sc needs a non-empty xstar".into()));
        }
        let terms = xstar
            .iter()
            .map(|&c| {
                Arc::new(Quadratic {
                    curvature: mu,
                    center: c,
                }) as Arc<dyn CoordinateFn>
            })
            .collect();
        Ok(Objective {
            name: "quadratic-sc".into(),
            terms,
            l1_weight: 0.0,
            mu,
            lipschitz_grad: Some(mu),
            minimizer: Some(xstar),
            min_value: Some(0.0),
        })
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_grad = Some(l);
        self
    }

    pub fn with_minimizer(mut self, xstar: Point, min_value: f64) -> Self {
        self.minimizer = Some(xstar);
        self.min_value = Some(min_value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Arc<dyn CoordinateFn>] {
        &self.terms
    }

    pub fn nonsmooth_weight(&self) -> f64 {
        self.l1_weight
    }

    pub fn is_smooth(&self) -> bool {
        self.l1_weight == 0.0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz_grad(&self) -> Option<f64> {
        self.lipschitz_grad
    }

    pub fn known_minimizer(&self) -> Option<&Point> {
        self.minimizer.as_ref()
    }

    pub fn known_min_value(&self) -> Option<f64> {
        self.min_value
    }

    /// True when `∇²f` exists everywhere, i.e. no ℓ₁ term and every
    /// coordinate term has a second derivative.
    pub fn has_hessian(&self) -> bool {
        self.is_smooth() && self.terms.iter().all(|t| t.second_derivative(0.0).is_some())
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.terms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.terms.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Differentiable part only.
    pub fn smooth_value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.terms.iter().zip(x.iter()).map(|(t, &u)| t.value(u)).sum())
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        let smooth = self.smooth_value(x)?;
        Ok(smooth + self.l1_weight * x.lp_norm(1))
    }

    /// Gradient of the differentiable part.
    pub fn gradient(&self, x: &Point) -> Result<Point> {
        self.check_dim(x)?;
        Ok(Point::from_iterator(
            x.len(),
            self.terms.iter().zip(x.iter()).map(|(t, &u)| t.derivative(u)),
        ))
    }

    /// `∇²f(x)·v`.
    pub fn hessian_vector(&self, x: &Point, v: &Point) -> Result<Point> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        if !self.is_smooth() {
            return Err(Error::HessianUnavailable(self.name.clone()));
        }
        let mut out = Point::zeros(x.len());
        for (i, t) in self.terms.iter().enumerate() {
            let h = t
                .second_derivative(x[i])
                .ok_or_else(|| Error::HessianUnavailable(self.name.clone()))?;
            out[i] = h * v[i];
        }
        Ok(out)
    }

    /// `prox_{s f}(v)` for the full objective, ℓ₁ part included.
    pub fn prox(&self, v: &Point, s: f64) -> Result<Point> {
        self.check_dim(v)?;
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("prox step must be > 0, got {s}")));
        }
        let w = self.l1_weight;
        let mut out = Point::zeros(v.len());
        for (i, t) in self.terms.iter().enumerate() {
            let vi = v[i];
            out[i] = if w == 0.0 {
                t.prox(vi, s)?
            } else {
                // 0 is optimal iff v/s - φ'(0) ∈ [-w, w]; otherwise the sign
                // of the solution is known and the ℓ₁ term is a shift of v.
                let z = vi / s - t.derivative(0.0);
                if z.abs() <= w {
                    0.0
                } else if z > w {
                    t.prox(vi - s * w, s)?
                } else {
                    t.prox(vi + s * w, s)?
                }
            };
        }
        Ok(out)
    }

    /// Minimal-norm element of `∂f(x)`.
    pub fn min_norm_subgradient(&self, x: &Point) -> Result<Point> {
        let mut g = self.gradient(x)?;
        let w = self.l1_weight;
        if w > 0.0 {
            for i in 0..g.len() {
                if x[i] > 0.0 {
                    g[i] += w;
                } else if x[i] < 0.0 {
                    g[i] -= w;
                } else {
                    g[i] -= g[i].clamp(-w, w);
                }
            }
        }
        Ok(g)
    }
}
