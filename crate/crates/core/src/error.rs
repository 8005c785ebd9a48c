use thiserror::Error;

pub type Result<T> = std::result::Result<T, VStateError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VStateError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectral grid too coarse: {nodes} nodes for {modes} modes of fold {fold} (need at least {required})")]
    Aliasing {
        nodes: usize,
        modes: usize,
        fold: usize,
        required: usize,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("evaluation point coincides with a quadrature node image")]
    NodeCollision,

    #[error("no real eigenvalue for m = {m}, b = {b}: discriminant {delta:e} < 0")]
    NoRealEigenvalue { m: usize, b: f64, delta: f64 },

    #[error("no bifurcation for m = {m}, b = {b}: discriminant {delta:e} is not positive")]
    NoBifurcation { m: usize, b: f64, delta: f64 },

    #[error("resonance: det M_{n}(lambda) = {det:e} vanishes")]
    Resonance { n: usize, det: f64 },

    #[error("no loop predicted: a_m = {a:e} is not positive")]
    NoLoopPredicted { a: f64 },

    #[error("Newton failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("singular Jacobian (reciprocal condition {rcond:e})")]
    SingularJacobian { rcond: f64 },

    #[error("reduction solve failed at lambda = {lambda}, t = {t}: {reason}")]
    ReductionSolve { lambda: f64, t: f64, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for VStateError {
    fn from(e: std::io::Error) -> Self {
        VStateError::Io(e.to_string())
    }
}
