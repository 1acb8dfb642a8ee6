use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state within {distance:e} of a primary (minimum {minimum:e})")]
    Singularity { distance: f64, minimum: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sign change of the root function on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("step size {step:e} fell below the floor at t = {t}")]
    StepUnderflow { t: f64, step: f64 },

    #[error("crossing #{requested} not found, {found} crossing(s) in window")]
    NoCrossing { requested: usize, found: usize },

    #[error("trajectory left the bounding box at t = {t}")]
    Escape { t: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("imaginary residual {residual:e} exceeds {limit:e} in {context}")]
    ImaginaryResidual {
        context: &'static str,
        residual: f64,
        limit: f64,
    },

    #[error("Phi construction failed: {0}")]
    PhiConstruction(String),

    #[error("tail bound {tail:e} exceeds the accuracy target {target:e}")]
    HorizonTooShort { tail: f64, target: f64 },

    #[error("tip #{requested} not found before t = {horizon}")]
    TipNotFound { requested: usize, horizon: f64 },

    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
