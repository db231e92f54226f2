use thiserror::Error;

/// Errors produced by the solvers, diagnostics and file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CFL number {cfl:.4} exceeds the limit {limit}")]
    Cfl { cfl: f64, limit: f64 },

    #[error("IMEX stability guard violated: dt * max(rho) = {0:.6} > 1")]
    StabilityGuard(f64),

    #[error("velocity boundary breach: outer-shell mass fraction {fraction:.3e} exceeds {threshold:.3e}; increase grid.v_max")]
    BoundaryBreach { fraction: f64, threshold: f64 },

    #[error("sup-ball radius {radius} is below half the velocity spacing {half_spacing}")]
    RadiusTooSmall { radius: f64, half_spacing: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
