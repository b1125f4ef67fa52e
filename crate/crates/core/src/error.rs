use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coordinate {value} outside [0, 1)")]
    CoordinateOutOfRange { value: f64 },

    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("non-finite value in field at index {index}")]
    NonFinite { index: usize },

    #[error("Leray projection is trivial in one dimension: only constant fields are divergence-free")]
    TrivialInOneDimension,

    #[error("kernel under-resolved: delta = {delta} < 2 * spacing = {min}")]
    UnresolvedKernel { delta: f64, min: f64 },

    #[error("invalid field specification: {0}")]
    InvalidField(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("CFL violation at step {step} (t = {t}): dt = {dt} exceeds limit {limit} (|b|_inf = {speed})")]
    CflViolation {
        step: usize,
        t: f64,
        dt: f64,
        limit: f64,
        speed: f64,
    },

    #[error("non-finite state at step {step} (t = {t})")]
    NumericalBlowup { step: usize, t: f64 },

    #[error("function is not convex: {0}")]
    NotConvex(String),

    #[error("test function does not vanish at final time: phi(T) = {value}")]
    TestFunctionNotVanishing { value: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
