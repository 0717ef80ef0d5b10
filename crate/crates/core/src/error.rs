//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step limit exhausted after {steps} steps at x = {x:e} (tolerance too tight?)")]
    StepLimit { steps: usize, x: f64 },

    #[error("step size underflow at x = {x:e}")]
    StepUnderflow { x: f64 },

    #[error("no zero located before x = {x_end:e}")]
    NoZero { x_end: f64 },

    #[error("operation requires a supercritical exponent: p = {p} <= p_S = {p_s}")]
    RequiresSupercritical { p: f64, p_s: f64 },

    #[error("asymptotic start not small enough: {0}")]
    StartTooLarge(String),

    #[error("start refinement did not converge: {0}")]
    RefinementDiverged(String),

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("target out of attained range: {0}")]
    OutOfRange(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("profile does not cover the requested range: {0}")]
    ProfileRange(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
