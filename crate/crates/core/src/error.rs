use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape parameter: {0}")]
    InvalidShape(String),

    #[error("shape parameter outside the admissible band: Im(tau) = {tau_im} not in [{min}, {max}]")]
    ShapeOutOfRange { tau_im: f64, min: f64, max: f64 },

    #[error("lattice reduction did not converge within {0} moves")]
    ReductionBudget(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("integrand is not periodic (boundary mismatch {0:.3e})")]
    NotPeriodic(f64),

    #[error("right-hand side has nonzero mean {0:.3e}")]
    NonzeroMean(f64),

    #[error("flux is not quantized: flux / 2pi = {0}")]
    FluxNotQuantized(f64),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("spectral parameter {lambda} collides with Landau level {level}")]
    SpectralCollision { lambda: f64, level: usize },

    #[error("root not bracketed for {0}")]
    NotBracketed(String),

    #[error("field b = {b} is on the wrong side of kappa^2 = {kappa2}: the branch exists only for {side}")]
    WrongSide {
        b: f64,
        kappa2: f64,
        side: &'static str,
    },

    #[error("degenerate denominator (2 kappa^2 - 1) beta + 1 = {0:.3e}")]
    DegenerateDenominator(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
