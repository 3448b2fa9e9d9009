use thiserror::Error;

/// Everything that can go wrong in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported spatial dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("basis too large: {points} grid points exceeds the budget of {budget}")]
    BasisTooLarge { points: usize, budget: usize },

    #[error("grid of {grid} points per axis cannot resolve cutoff {cutoff} without aliasing")]
    AliasingUnresolvable { grid: usize, cutoff: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("projector onto the complement of a zero field")]
    DegenerateProjector,

    #[error("operation on a zero field: {0}")]
    ZeroField(&'static str),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate ground state: spectral gap {gap:.3e} is too small")]
    DegenerateGroundState { gap: f64 },

    #[error("gradient flow stagnated: step fell below {step:.1e}")]
    Stagnation { step: f64 },

    #[error("coercivity violated: negative curvature {curvature:.3e} on the complement of the coarse state")]
    CoercivityViolated { curvature: f64 },

    #[error("correction too large for affine normalization: |w|_L2 = {norm:.6}")]
    CorrectionTooLarge { norm: f64 },

    #[error("near-singular boundary value problem (smallest Ritz value {ritz:.3e})")]
    NearSingularBvp { ritz: f64 },

    #[error("singular or indefinite operator: curvature {curvature:.3e} along a search direction")]
    IndefiniteOperator { curvature: f64 },

    #[error("fine-only diagonal not invertible: lambda {lambda:.6} >= a0 (M^2 + 1) = {bound:.6}")]
    DiagonalNotInvertible { lambda: f64, bound: f64 },

    #[error("certificate unsupported: {0}")]
    CertificateUnsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fine cutoff {fine} is below the required {required} for coarse cutoff {coarse}")]
    FineSpaceTooSmall {
        coarse: usize,
        fine: usize,
        required: usize,
    },

    #[error("dense oracle size cap exceeded: {modes} modes > {cap}")]
    OracleTooLarge { modes: usize, cap: usize },

    #[error("fit needs at least three positive points: {0}")]
    FitData(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
