use thiserror::Error;

/// Failures surfaced by the numeric kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("collision: gap {gap:e} between particles {index} and its right neighbour is below the floor {floor:e} at t = {t}")]
    Collision {
        index: usize,
        gap: f64,
        floor: f64,
        t: f64,
    },

    #[error("step size underflow: h = {step:e} at t = {t}")]
    Stiffness { t: f64, step: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
