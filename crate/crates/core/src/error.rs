use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite state at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("unknown model kind or parameter mismatch: {0}")]
    UnknownKind(String),
    #[error("non-positive radius {0} for a polar model")]
    NonPositiveRadius(f64),
    #[error("no analytic form for model kind {0}")]
    NoAnalyticForm(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("degenerate design matrix")]
    DegenerateDesign,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("effective degrees of freedom vanish")]
    ZeroDof,
    #[error("point arity {got} does not match basis arity {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("nontrivial Floquet multiplier is not positive real: {0}")]
    ComplexMultiplier(String),
    #[error("trajectory too short: {0}")]
    TooShort(String),
    #[error("trajectory left the basin at t = {time} (r = {radius})")]
    BasinEscape { time: f64, radius: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),
    #[error("insufficient coverage for oscillator {oscillator}: {filled} of 12 angular bins")]
    InsufficientCoverage { oscillator: usize, filled: usize },
    #[error("empty radius data")]
    EmptyRadiusData,
    #[error("unknown pair ({0}, {1})")]
    UnknownPair(usize, usize),
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("invalid config at {key}: {message}")]
    InvalidConfig { key: String, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    pub fn invalid_config(key: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
