use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unsupported derivative order {0} (supported: 1..=4)")]
    UnsupportedOrder(u32),
    #[error("kernel argument ({x}, {y}) is numerically singular")]
    SingularKernel { x: f64, y: f64 },
    #[error("evaluation point {x} within pv_cut {pv_cut} of the boundary")]
    BoundaryEvaluation { x: f64, pv_cut: f64 },
    #[error("pv_cut {pv_cut} must exceed the grid spacing {spacing}")]
    InvalidPvCut { pv_cut: f64, spacing: f64 },
    #[error("seminorm order must be non-negative, got {0}")]
    InvalidSeminormOrder(f64),
    #[error("non-finite coefficient at index {0}")]
    NonFiniteCoefficient(usize),
    #[error("mobility model: {0}")]
    InvalidModel(String),
    #[error("negative input {0} to the unregularized mobility")]
    NegativeMobility(f64),
    #[error("non-positive sample {0} in the G entropy")]
    NonPositiveSample(f64),
    #[error("step system is not positive definite")]
    NotPositiveDefinite,
    #[error("Picard iteration did not converge within {0} iterations")]
    PicardDiverged(u32),
    #[error("ladder must be strictly decreasing and positive")]
    InvalidLadder,
    #[error("initial condition: {0}")]
    InvalidInitial(String),
    #[error("config: {0}")]
    Config(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
