//! Second-order Taylor data of the reduced bifurcation equation.
//!
//! Near `(λ*, 0)` the scalar reduced function behaves like
//! `F(λ, t) ≈ -(a s + c s² + d t²)` with `s = λ - λ*`. For `a > 0` the zero
//! set is approximately an ellipse through `λ*` and `λ* - a/c`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VStateError};
use crate::linear::{kernel_data, matrix_mn, KernelData, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub m: usize,
    pub b: f64,
    pub sign: Sign,
    pub lambda_star: f64,
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub k: f64,
    pub beta_tilde: f64,
    pub alpha_hat: f64,
    pub vhat: [f64; 2],
    pub x0: f64,
    pub lambda_center: f64,
    pub semi_lambda: f64,
    pub semi_t: f64,
}

/// `(α̂, 0)`: coefficient of `e_{2m}` in `d²/dt² G(λ*, t v)` at `t = 0`.
pub fn second_derivative_g(kernel: &KernelData) -> [f64; 2] {
    let m = kernel.m as f64;
    let h = kernel.v2 * kernel.b.powi(kernel.m as i32) - kernel.b * kernel.v1;
    [2.0 * m * h * h, 0.0]
}

pub fn quadratic_coeffs(m: usize, b: f64, sign: Sign) -> Result<QuadraticForm> {
    let kernel = kernel_data(m, b, sign)?;
    let mf = m as f64;
    let mi = m as i32;
    let lam = kernel.lambda_star;
    let p = kernel.p;
    let b2m = b.powi(2 * mi);
    let s = p * p + b2m;
    let sq = s.sqrt();

    let det2m = matrix_mn(2 * m, lam, b)?.det;
    if det2m == 0.0 {
        return Err(VStateError::Resonance { n: 2 * m, det: det2m });
    }

    let a = -mf * (p * p - b2m) / (b.powi(mi - 1) * sq);
    let c = -2.0 * mf * mf * b.powi(1 - mi) * p.powi(3) / (s * sq);
    let alpha_hat = second_derivative_g(&kernel)[0];
    let beta_tilde = -b * alpha_hat / det2m;
    let k = (2.0 * lam * mf - 2.0 * mf + 1.0)
        * (b.powi(1 - mi) * (mf * lam - 1.0) * p * p + (1.0 - 2.0 * mf) * p * b.powi(mi + 1) + mf * b.powi(3 * mi - 1))
        / sq;
    let q = b.powi(2 * mi - 2) - p * p;
    let d = mf / 2.0 * (mf - 1.0) * b.powi(3 - 3 * mi) * q * q / sq - beta_tilde / 2.0 * k;
    let vhat = [
        -b * alpha_hat * (2.0 * mf * lam - 2.0 * mf + 1.0) / det2m,
        -b2m * alpha_hat / det2m,
    ];
    let x0 = a / (2.0 * c);
    Ok(QuadraticForm {
        m,
        b,
        sign,
        lambda_star: lam,
        a,
        c,
        d,
        k,
        beta_tilde,
        alpha_hat,
        vhat,
        x0,
        lambda_center: lam - x0,
        semi_lambda: x0,
        semi_t: a / (2.0 * (d * c).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsePrediction {
    pub lambda_center: f64,
    pub semi_lambda: f64,
    pub semi_t: f64,
    /// `λ* - 2x₀`, the predicted second crossing of the trivial branch
    pub lambda_far: f64,
}

pub fn ellipse_prediction(q: &QuadraticForm) -> Result<EllipsePrediction> {
    if !(q.a > 0.0) {
        return Err(VStateError::NoLoopPredicted { a: q.a });
    }
    Ok(EllipsePrediction {
        lambda_center: q.lambda_center,
        semi_lambda: q.semi_lambda,
        semi_t: q.semi_t,
        lambda_far: q.lambda_star - 2.0 * q.x0,
    })
}
