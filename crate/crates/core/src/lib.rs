//! Doubly connected rotating vortex patches (V-states).
//!
//! Boundaries are exterior conformal maps `Φ_j(w) = b_j w + Σ a_{j,n} w^{-(nm-1)}`
//! with real coefficients; the rotating-patch condition is a pair of real
//! equations on the unit circle whose solutions are computed by a spectral
//! Newton method and followed in `λ = 1 - 2Ω` by pseudo-arclength continuation.

pub mod continuation;
pub mod error;
pub mod fourier;
pub mod io;
pub mod linear;
pub mod reduction;
pub mod residual;

pub use error::{Result, VStateError};
pub use fourier::{FourierConformalMap, SpectralGrid};
pub use linear::{KernelData, LinearBlock, Sign};
pub use reduction::QuadraticForm;
pub use residual::{PatchState, ResidualOperator, ResidualVector};
