use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hessian unavailable: objective `{0}` is not twice differentiable")]
    HessianUnavailable(String),

    #[error("scalar prox solve did not converge after {iterations} iterations (v = {v}, s = {s})")]
    ProxNonConvergence { iterations: usize, v: f64, s: f64 },

    #[error("time {t} outside the domain [{t_min}, +inf)")]
    OutOfDomain { t: f64, t_min: f64 },

    #[error("adaptive quadrature failed to converge on [{a}, {b}]")]
    QuadratureNonConvergence { a: f64, b: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{context}: hypothesis violated ({hypothesis})")]
    HypothesisViolated {
        context: String,
        hypothesis: String,
    },

    #[error("step size underflow at t = {t} (h = {h:e} < h_min)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("minimum value of the objective is unknown")]
    UnknownMinimum,

    #[error("pole of a(t): denominator {denominator:e} <= 0 at t = {t}")]
    CoefficientPole { t: f64, denominator: f64 },

    #[error("coefficient conditions never all hold on the grid")]
    ConditionsNeverHold,

    #[error("nonpositive value {value:e} at t = {t} in a log-log fit")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn hypothesis(context: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Error::HypothesisViolated {
            context: context.into(),
            hypothesis: hypothesis.into(),
        }
    }
}
