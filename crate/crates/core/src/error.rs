use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The cut-out graph has no cycle at this depth; retry with a larger depth.
    #[error("degenerate graph at depth {depth}: no allowed cycle survives")]
    DegenerateGraph { depth: u32 },

    #[error("cylinder [{left}, {right}] contains the singularity")]
    SingularCylinder { left: f64, right: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("pressure curve does not cover [0, {needed}] (max sample t = {available})")]
    InsufficientCurve { needed: f64, available: f64 },

    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("cell {index} has mass {mass:e} below the floor {floor:e} required for q < 0")]
    MassFloorViolation { index: usize, mass: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
