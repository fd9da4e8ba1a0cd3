use thiserror::Error;

/// Errors produced by parsing, catalog lookup, and the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("unbound parameter `{0}` (no value supplied)")]
    UnboundParameter(String),

    #[error("({0:.6}, {1:.6}, {2:.6}) is not a fixed point: |F| = {3:.3e}")]
    NotAFixedPoint(f64, f64, f64, f64),

    #[error("step size underflow at t = {0:.6e}")]
    StepSizeUnderflow(f64),

    #[error("no fixed points found in the search box")]
    NoFixedPoints,

    #[error("fixed points of `{0}` are complex-valued at these parameters")]
    ComplexFixedPoints(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
