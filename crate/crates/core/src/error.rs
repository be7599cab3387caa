use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error(
        "quasi-metric violation: rho({x},{y}) / (rho({x},{z}) + rho({z},{y})) = {ratio} exceeds kappa = {kappa}"
    )]
    QuasiMetricViolation {
        x: String,
        y: String,
        z: String,
        ratio: f64,
        kappa: f64,
    },

    #[error("hypothesis not met: worst ratio {worst_ratio} exceeds the admissible bound {bound}")]
    HypothesisNotMet { worst_ratio: f64, bound: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
