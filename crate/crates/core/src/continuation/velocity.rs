//! Direct Biot-Savart check of a rotating patch.
//!
//! The velocity induced by the unit-vorticity patch `D` is
//! `u(z) = (i/2π) ∫_D dA(ζ) / conj(z - ζ)`. On a V-state rotating with
//! angular velocity `Ω` the relative field `u - iΩz` is tangent to both
//! boundaries. The area integral is evaluated with the midpoint rule on the
//! cells `ζ = Φ₂(e^{iθ}) + s(Φ₁(e^{iθ}) - Φ₂(e^{iθ}))`, `0 ≤ s ≤ 1`, and the
//! boundary points are placed on cell corners so the near-field cells come
//! in mirror pairs.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Result, VStateError};
use crate::fourier::SpectralGrid;
use crate::residual::PatchState;

/// Normal components of `u - iΩz` on the outer and inner boundary points of
/// half a sector, midpoint rule on `n_theta × n_s` cells.
fn normal_velocities(state: &PatchState, n_theta: usize, n_s: usize) -> Vec<f64> {
    let m = state.fold();
    let d_theta = 2.0 * PI / n_theta as f64;
    let d_s = 1.0 / n_s as f64;
    let mut cells: Vec<(Complex64, f64)> = Vec::with_capacity(n_theta * n_s);
    for k in 0..n_theta {
        let w = Complex64::from_polar(1.0, (k as f64 + 0.5) * d_theta);
        let (z1, z2) = (state.outer.value_at(w), state.inner.value_at(w));
        let (dz1, dz2) = (
            Complex64::i() * w * state.outer.deriv_at(w),
            Complex64::i() * w * state.inner.deriv_at(w),
        );
        let ds_vec = z1 - z2;
        for l in 0..n_s {
            let s = (l as f64 + 0.5) * d_s;
            let zeta = z2 + s * ds_vec;
            let dtheta_vec = dz2 + s * (dz1 - dz2);
            let jac = (dtheta_vec.conj() * ds_vec).im.abs();
            cells.push((zeta, jac * d_theta * d_s));
        }
    }

    let omega = state.omega();
    let mut out = Vec::new();
    for k in 0..=n_theta / (2 * m) {
        let w = Complex64::from_polar(1.0, k as f64 * d_theta);
        for map in [&state.outer, &state.inner] {
            let z = map.value_at(w);
            let normal = w * map.deriv_at(w);
            let normal = normal / normal.norm();
            let mut acc = Complex64::new(0.0, 0.0);
            for &(zeta, area) in &cells {
                acc += area / (z - zeta).conj();
            }
            let u = Complex64::i() * acc / (2.0 * PI);
            let rel = u - Complex64::i() * omega * z;
            out.push((rel * normal.conj()).re);
        }
    }
    out
}

/// Largest normal component of the relative velocity on the boundary
/// points of half a sector, from `density × density` area cells.
///
/// The cells are sheared against the boundary normal, which leaves a
/// first-order error in the cell size; it is removed by extrapolating with
/// the same rule on half the density.
pub fn velocity_check(state: &PatchState, density: usize) -> Result<f64> {
    if density < 16 {
        return Err(VStateError::Domain("area quadrature density must be at least 16".into()));
    }
    let m = state.fold();
    state.check_geometry(&SpectralGrid::new(state.modes().max(1), m)?)?;
    // angular cell counts are multiples of 2m so boundary points sit on cell corners
    let coarse_theta = (density / 2).div_ceil(2 * m) * 2 * m;
    let fine = normal_velocities(state, 2 * coarse_theta, density);
    let coarse = normal_velocities(state, coarse_theta, density / 2);
    // every other fine point coincides with a coarse point
    let mut worst: f64 = 0.0;
    for (k, c) in coarse.chunks_exact(2).enumerate() {
        for j in 0..2 {
            worst = worst.max((2.0 * fine[4 * k + j] - c[j]).abs());
        }
    }
    Ok(worst)
}
