//! Additive gradient errors `e(t)` and their combined contribution
//! `g(t) = e(t) + β ė(t)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objectives::Point;
use crate::quadrature::{adaptive_simpson, adaptive_simpson_pieces};

/// Scalar error profile `t ↦ e(t)` used by [`PerturbationSignal::custom`].
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Zero,
    CosineDecay { delta: f64 },
    Custom(Profile),
}

/// Which coordinates receive the scalar error profile.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Components {
    #[default]
    All,
    Indices(Vec<usize>),
}

/// A time-dependent error `e(t) = ψ(t)·𝟙_S` where `ψ` is a scalar profile
/// and `S` the selected coordinates.
#[derive(Clone)]
pub struct PerturbationSignal {
    shape: Shape,
    mask: Vec<bool>,
    t_min: f64,
}

impl fmt::Debug for PerturbationSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match &self.shape {
            Shape::Zero => "zero".to_string(),
            Shape::CosineDecay { delta } => format!("cosine-decay(delta={delta})"),
            Shape::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("PerturbationSignal")
            .field("shape", &shape)
            .field("mask", &self.mask)
            .field("t_min", &self.t_min)
            .finish()
    }
}

/// Outcome of [`classify_integrability`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrability {
    Converged,
    Diverging,
    Inconclusive,
}

impl Integrability {
    pub fn as_str(self) -> &'static str {
        match self {
            Integrability::Converged => "converged",
            Integrability::Diverging => "diverging",
            Integrability::Inconclusive => "inconclusive",
        }
    }
}

impl PerturbationSignal {
    pub fn zero(dimension: usize) -> Self {
        PerturbationSignal {
            shape: Shape::Zero,
            mask: vec![true; dimension],
            t_min: 1.0,
        }
    }

    /// `e(t) = cos(2πt)/t^δ` on every component.
    pub fn cosine_decay(delta: f64, dimension: usize) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(PerturbationSignal {
            shape: Shape::CosineDecay { delta },
            mask: vec![true; dimension],
            t_min: 1.0,
        })
    }

    /// A user profile; its derivative is taken by central differences.
    pub fn custom(dimension: usize, profile: Profile) -> Self {
        PerturbationSignal {
            shape: Shape::Custom(profile),
            mask: vec![true; dimension],
            t_min: 1.0,
        }
    }

    /// Restricts the error to the given coordinates.
    pub fn with_components(mut self, components: &Components) -> Result<Self> {
        let n = self.mask.len();
        match components {
            Components::All => self.mask = vec![true; n],
            Components::Indices(idx) => {
                let mut mask = vec![false; n];
                for &i in idx {
                    if i >= n {
                        return Err(Error::InvalidParameter(format!(
                            "perturbation component {i} out of range for dimension {n}"
                        )));
                    }
                    mask[i] = true;
                }
                self.mask = mask;
            }
        }
        Ok(self)
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(Error::InvalidParameter(format!("t_min must be > 0, got {t_min}")));
        }
        self.t_min = t_min;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.mask.len()
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn delta(&self) -> Option<f64> {
        match self.shape {
            Shape::CosineDecay { delta } => Some(delta),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero) || self.mask.iter().all(|m| !m)
    }

    /// False when `ė` comes from finite differences.
    pub fn derivative_is_analytic(&self) -> bool {
        !matches!(self.shape, Shape::Custom(_))
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if t < self.t_min || !t.is_finite() {
            return Err(Error::OutOfDomain { t, t_min: self.t_min });
        }
        Ok(())
    }

    fn profile(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::CosineDecay { delta } => phase(t).cos() / t.powf(*delta),
            Shape::Custom(p) => p(t),
        }
    }

    fn profile_derivative(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::CosineDecay { delta } => {
                let d = *delta;
                let w = phase(t);
                -2.0 * PI * w.sin() / t.powf(d) - d * w.cos() / t.powf(d + 1.0)
            }
            Shape::Custom(p) => {
                let h = 1e-6 * t.abs().max(1.0);
                (p(t + h) - p(t - h)) / (2.0 * h)
            }
        }
    }

    fn spread(&self, value: f64) -> Point {
        Point::from_iterator(self.mask.len(), self.mask.iter().map(|&m| if m { value } else { 0.0 }))
    }

    pub fn eval(&self, t: f64) -> Result<Point> {
        self.check_domain(t)?;
        Ok(self.spread(self.profile(t)))
    }

    pub fn eval_derivative(&self, t: f64) -> Result<Point> {
        self.check_domain(t)?;
        Ok(self.spread(self.profile_derivative(t)))
    }

    /// `g(t) = e(t) + β ė(t)`.
    pub fn combine_g(&self, beta: f64, t: f64) -> Result<Point> {
        self.check_domain(t)?;
        Ok(self.spread(self.profile(t) + beta * self.profile_derivative(t)))
    }

    fn active(&self) -> f64 {
        (self.mask.iter().filter(|&&m| m).count() as f64).sqrt()
    }

    /// `‖e(t)‖` without allocating.
    pub fn norm(&self, t: f64) -> f64 {
        self.active() * self.profile(t).abs()
    }

    /// `‖e(t) + β ė(t)‖` without allocating.
    pub fn g_norm(&self, beta: f64, t: f64) -> f64 {
        self.active() * (self.profile(t) + beta * self.profile_derivative(t)).abs()
    }

    /// `∫_{t0}^{T} t^p ‖e(t)‖ dt` to absolute tolerance 1e-10, floored at
    /// relative 1e-12.
    pub fn moment_integral(&self, p: f64, t0: f64, t_end: f64) -> Result<f64> {
        self.check_domain(t0)?;
        if !(t_end > t0) {
            return Err(Error::InvalidParameter(format!("need T > t0, got t0={t0}, T={t_end}")));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let f = |t: f64| t.powf(p) * self.norm(t);
        match self.shape {
            // |cos(2πt)| has kinks at t = 1/4 + k/2; integrate between them
            Shape::CosineDecay { .. } => {
                let mut breaks = vec![t0];
                let mut k = ((t0 - 0.25) / 0.5).floor() + 1.0;
                loop {
                    let z = 0.25 + 0.5 * k;
                    if z >= t_end {
                        break;
                    }
                    if z > t0 {
                        breaks.push(z);
                    }
                    k += 1.0;
                }
                breaks.push(t_end);
                adaptive_simpson_pieces(f, &breaks, 1e-10)
            }
            _ => adaptive_simpson(f, t0, t_end, 1e-10),
        }
    }
}

/// `2πt` reduced modulo `2π`; `t − ⌊t⌋` is exact, so large `t` loses no
/// accuracy in the phase.
fn phase(t: f64) -> f64 {
    2.0 * PI * (t - t.floor())
}

/// Horizons over which [`classify_integrability`] compares moment integrals.
pub const INTEGRABILITY_HORIZONS: [f64; 3] = [1e2, 1e3, 1e4];

/// Decides from the two decade increments of `∫ t^p‖e‖` whether the moment
/// is finite.
///
/// With `d₁ = ∫_{10²}^{10³}` and `d₂ = ∫_{10³}^{10⁴}`: increments below 1e-6,
/// or a decay ratio `d₂/d₁ < 0.9` (integrand decaying faster than about
/// `t^{-1.05}`), count as converged; a ratio above 1 (growing increments)
/// as diverging; anything between is inconclusive.
pub fn classify_integrability(signal: &PerturbationSignal, p: f64) -> Result<Integrability> {
    let t0 = signal.t_min();
    let [h1, h2, h3] = INTEGRABILITY_HORIZONS;
    let i1 = signal.moment_integral(p, t0, h1)?;
    let i2 = i1 + signal.moment_integral(p, h1, h2)?;
    let i3 = i2 + signal.moment_integral(p, h2, h3)?;
    let d1 = i2 - i1;
    let d2 = i3 - i2;
    if d2 < 1e-6 && d1 < 1e-6 {
        return Ok(Integrability::Converged);
    }
    let ratio = d2 / d1;
    Ok(if ratio < 0.9 {
        Integrability::Converged
    } else if ratio > 1.0 {
        Integrability::Diverging
    } else {
        Integrability::Inconclusive
    })
}
