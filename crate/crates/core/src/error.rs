use thiserror::Error;

/// Errors raised by the limit-spectrum computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("atom location {0} is negative")]
    NegativeLocation(f64),
    #[error("atom weight {0} is not positive")]
    NonPositiveWeight(f64),
    #[error("non-finite value in measure definition")]
    NonFinite,
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    WeightSumMismatch(f64),
    #[error("measure is concentrated at zero")]
    NoPositiveAtom,
    #[error("ratio c = {0} must be positive and finite")]
    InvalidRatio(f64),
    #[error("evaluation point hits a pole")]
    PoleHit,
    #[error("solver did not converge (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },
    #[error("continuation failed at path index {index} (best residual {best_residual:e})")]
    PathNoConvergence { index: usize, best_residual: f64 },
    #[error("initial point must lie in the closed upper half plane")]
    InvalidInit,
    #[error("evaluation point must have positive imaginary part")]
    NotUpperHalfPlane,
    #[error("density is undefined at x = 0; the atom is reported separately")]
    ZeroPoint,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("branch images overlap at x = {x} (overlap {overlap:e})")]
    InconsistentScan { x: f64, overlap: f64 },
    #[error("stability margin does not change sign on the bracket")]
    NoSignChange,
    #[error("degenerate edge: |x''| = {x_second:e}, third derivative {f3:e}")]
    DegenerateEdge { x_second: f64, f3: f64 },
    #[error("point is not on a branch (residual {0:e})")]
    OffBranch(f64),
    #[error("simulation size {rows}x{cols} exceeds the memory budget")]
    DimensionOverflow { rows: usize, cols: usize },
    #[error("density profile misses support interval [{lo}, {hi}]")]
    CoverageGap { lo: f64, hi: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
