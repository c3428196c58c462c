use thiserror::Error;

/// Errors raised by model construction and inference.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("correlation length {lambda} does not exceed the searcher size {searcher_size}")]
    CorrelationTooShort { lambda: f64, searcher_size: f64 },

    #[error("grid must be at least 3x3, got {width}x{height}")]
    GridTooSmall { width: usize, height: usize },

    #[error("cell ({x}, {y}) lies outside the grid")]
    OutsideGrid { x: i32, y: i32 },

    #[error("belief weights must be non-negative, finite and not all zero")]
    InvalidWeights,

    #[error("rate table was built for a different grid")]
    GridMismatch,

    #[error("Bayes update at ({x}, {y}) with {k} detections has a degenerate normaliser")]
    DegenerateUpdate { x: i32, y: i32, k: u64 },

    #[error("sweep value {value} is not admissible: {reason}")]
    InvalidSweepValue { value: f64, reason: String },

    #[error("invalid sweep specification: {0}")]
    InvalidSweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;
