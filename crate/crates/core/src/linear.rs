//! Linearization of the patch functional at the annulus.
//!
//! At `f = 0` the Jacobian acts on mode `n` of the m-fold expansion through
//! the 2×2 block `M_{nm}(λ)`; its singular values of λ are the bifurcation
//! points `λ_m^±`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VStateError};

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(VStateError::Domain(format!("b = {b} not in (0, 1)")))
    }
}

/// The multiplier matrix `M_n(λ)` acting on the pair `(a_{1,n}, a_{2,n})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBlock {
    pub n: usize,
    pub entries: [[f64; 2]; 2],
    pub det: f64,
}

impl LinearBlock {
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let e = &self.entries;
        [e[0][0] * x[0] + e[0][1] * x[1], e[1][0] * x[0] + e[1][1] * x[1]]
    }

    pub fn solve(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        if self.det == 0.0 || !self.det.is_finite() {
            return Err(VStateError::Resonance { n: self.n, det: self.det });
        }
        let e = &self.entries;
        Ok([
            (e[1][1] * y[0] - e[0][1] * y[1]) / self.det,
            (e[0][0] * y[1] - e[1][0] * y[0]) / self.det,
        ])
    }

    /// Determinant in factored form `(nλ-1-nb²)·b(nλ-n+1) + b^{2n+1}`.
    pub fn det_factored(n: usize, lambda: f64, b: f64) -> f64 {
        let nf = n as f64;
        (nf * lambda - 1.0 - nf * b * b) * b * (nf * lambda - nf + 1.0) + b.powi(2 * n as i32 + 1)
    }
}

pub fn matrix_mn(n: usize, lambda: f64, b: f64) -> Result<LinearBlock> {
    check_b(b)?;
    if n == 0 {
        return Err(VStateError::Domain("mode index must be at least 1".into()));
    }
    let nf = n as f64;
    let entries = [
        [nf * lambda - 1.0 - nf * b * b, b.powi(n as i32 + 1)],
        [-b.powi(n as i32), b * (nf * lambda - nf + 1.0)],
    ];
    let det = entries[0][0] * entries[1][1] - entries[0][1] * entries[1][0];
    Ok(LinearBlock { n, entries, det })
}

/// `Δ_n(b) = ((1-b²)n/2 - 1)² - b^{2n}`.
pub fn discriminant(n: usize, b: f64) -> Result<f64> {
    check_b(b)?;
    let h = (1.0 - b * b) * n as f64 / 2.0 - 1.0;
    Ok(h * h - b.powi(2 * n as i32))
}

/// `n(1-b²)/2 - 1 ≥ b^n`, which for `n ≥ 3` is equivalent to `Δ_n(b) ≥ 0`.
pub fn spectral_condition(n: usize, b: f64) -> Result<bool> {
    check_b(b)?;
    Ok(n as f64 * (1.0 - b * b) / 2.0 - 1.0 >= b.powi(n as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = VStateError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            _ => Err(VStateError::Malformed(format!("unknown sign {s:?}"))),
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalues {
    pub minus: f64,
    pub plus: f64,
    pub delta: f64,
}

impl Eigenvalues {
    pub fn get(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.plus,
            Sign::Minus => self.minus,
        }
    }

    /// Angular velocities `Ω = (1-λ)/2`; `Ω_m^+` comes from `λ_m^-`.
    pub fn omegas(&self) -> (f64, f64) {
        ((1.0 - self.plus) / 2.0, (1.0 - self.minus) / 2.0)
    }
}

/// Discriminants this close below zero are roundoff at `b = b_m^*` and count as zero.
const DELTA_ROUNDOFF: f64 = 1e-14;

fn real_discriminant(m: usize, b: f64) -> Result<f64> {
    let delta = discriminant(m, b)?;
    if delta < -DELTA_ROUNDOFF {
        return Err(VStateError::NoRealEigenvalue { m, b, delta });
    }
    Ok(delta.max(0.0))
}

/// `λ_m^± = (1+b²)/2 ± √Δ_m/m`.
pub fn eigenvalues(m: usize, b: f64) -> Result<Eigenvalues> {
    let delta = real_discriminant(m, b)?;
    let mid = (1.0 + b * b) / 2.0;
    let r = delta.sqrt() / m as f64;
    Ok(Eigenvalues { minus: mid - r, plus: mid + r, delta })
}

/// `g(b) = 1 + b^m - m(1-b²)/2`, whose root in (0,1) is `b_m^*`.
pub fn degeneracy_function(m: usize, b: f64) -> f64 {
    1.0 + b.powi(m as i32) - m as f64 * (1.0 - b * b) / 2.0
}

/// Root of [`degeneracy_function`] in (0,1) by bisection.
pub fn find_bstar(m: usize) -> Result<f64> {
    if m < 3 {
        return Err(VStateError::Domain(format!("m = {m}: need m >= 3")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let glo = degeneracy_function(m, lo);
    let ghi = degeneracy_function(m, hi);
    debug_assert!(glo < 0.0 && ghi > 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = degeneracy_function(m, mid);
        if g == 0.0 {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `mλ_m^± - m + 1 = -√(b^{2m}+Δ_m) ± √Δ_m`, free of cancellation near `Δ = 0`.
pub fn kernel_p(m: usize, b: f64, sign: Sign) -> Result<f64> {
    let delta = real_discriminant(m, b)?;
    let bm2 = b.powi(2 * m as i32);
    let root = (bm2 + delta).sqrt();
    Ok(match sign {
        // the two roots nearly cancel when b^{2m} ≪ Δ
        Sign::Plus => -bm2 / (root + delta.sqrt()),
        Sign::Minus => -root - delta.sqrt(),
    })
}

/// Kernel and cokernel data at `λ_m^±`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelData {
    pub m: usize,
    pub b: f64,
    pub sign: Sign,
    pub lambda_star: f64,
    /// `mλ* - m + 1`
    pub p: f64,
    pub v1: f64,
    pub v2: f64,
    /// unit normal to the range of `M_m(λ*)`
    pub what_hat: [f64; 2],
}

impl KernelData {
    pub fn v(&self) -> [f64; 2] {
        [self.v1, self.v2]
    }

    pub fn v_norm(&self) -> f64 {
        self.v1.hypot(self.v2)
    }

    /// Unit vector spanning the range of `M_m(λ*)`.
    pub fn range_direction(&self) -> [f64; 2] {
        [-self.what_hat[1], self.what_hat[0]]
    }

    /// `Ŵ`-component of a mode-`m` residual pair.
    pub fn cokernel_component(&self, pair: [f64; 2]) -> f64 {
        pair[0] * self.what_hat[0] + pair[1] * self.what_hat[1]
    }
}

pub fn kernel_data(m: usize, b: f64, sign: Sign) -> Result<KernelData> {
    let ev = eigenvalues(m, b)?;
    let p = kernel_p(m, b, sign)?;
    let bm = b.powi(m as i32);
    let norm = p.hypot(bm);
    Ok(KernelData {
        m,
        b,
        sign,
        lambda_star: ev.get(sign),
        p,
        v1: p / b.powi(m as i32 - 1),
        v2: 1.0,
        what_hat: [p / norm, -bm / norm],
    })
}

/// The exact Jacobian at `f = 0`: blocks `M_{nm}(λ)`, `n = 1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrivialJacobian {
    pub fold: usize,
    pub blocks: Vec<LinearBlock>,
}

impl TrivialJacobian {
    /// Action on interleaved coefficients `(a_{1,1}, a_{2,1}, a_{1,2}, ...)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .zip(x.chunks_exact(2))
            .flat_map(|(blk, pair)| blk.apply([pair[0], pair[1]]))
            .collect()
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(y.len());
        for (blk, pair) in self.blocks.iter().zip(y.chunks_exact(2)) {
            out.extend(blk.solve([pair[0], pair[1]])?);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let dim = 2 * self.blocks.len();
        let mut a = nalgebra::DMatrix::zeros(dim, dim);
        for (k, blk) in self.blocks.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    a[(2 * k + i, 2 * k + j)] = blk.entries[i][j];
                }
            }
        }
        a
    }
}

pub fn trivial_jacobian(lambda: f64, b: f64, m: usize, modes: usize) -> Result<TrivialJacobian> {
    let blocks = (1..=modes)
        .map(|n| matrix_mn(n * m, lambda, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrivialJacobian { fold: m, blocks })
}

/// Smallest `|det M_{nm}(λ*)|` over `n = 2..=N`, failing on an exact zero.
pub fn non_resonance(kernel: &KernelData, modes: usize) -> Result<f64> {
    let mut smallest = f64::INFINITY;
    for n in 2..=modes.max(2) {
        let blk = matrix_mn(n * kernel.m, kernel.lambda_star, kernel.b)?;
        if blk.det == 0.0 {
            return Err(VStateError::Resonance { n: n * kernel.m, det: blk.det });
        }
        smallest = smallest.min(blk.det.abs());
    }
    Ok(smallest)
}
