//! Truncated m-fold exterior conformal maps and sine-mode analysis on the
//! unit circle.
//!
//! A boundary is the image of the unit circle under
//! `Φ(w) = lead·w + Σ_{n=1}^{N} a_n w^{-(nm-1)}` with real `a_n`. Only the
//! coefficients of the m-fold subspace are stored.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VStateError};

const UNIT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierConformalMap {
    lead: f64,
    fold: usize,
    coeffs: Vec<f64>,
}

impl FourierConformalMap {
    pub fn new(lead: f64, fold: usize, coeffs: Vec<f64>) -> Result<Self> {
        if !(lead > 0.0 && lead <= 1.0) {
            return Err(VStateError::Domain(format!("lead coefficient {lead} not in (0, 1]")));
        }
        if fold == 0 {
            return Err(VStateError::Domain("fold must be positive".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(VStateError::Domain("non-finite coefficient".into()));
        }
        Ok(Self { lead, fold, coeffs })
    }

    /// The circle of radius `lead` with `n` zero coefficients.
    pub fn circle(lead: f64, fold: usize, n: usize) -> Result<Self> {
        Self::new(lead, fold, vec![0.0; n])
    }

    pub fn lead(&self) -> f64 {
        self.lead
    }

    pub fn fold(&self) -> usize {
        self.fold
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    /// Sufficient univalence test: `lead > Σ (nm-1)|a_n|` keeps `Φ'` away from
    /// zero on `|w| >= 1`.
    pub fn univalence_margin(&self) -> f64 {
        let m = self.fold as f64;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| ((i + 1) as f64 * m - 1.0) * a.abs())
            .sum();
        self.lead - sum
    }

    pub fn is_univalent_safe(&self) -> bool {
        self.univalence_margin() > 0.0
    }

    /// `Φ(w)` for `|w| = 1`.
    pub fn eval(&self, w: Complex64) -> Result<Complex64> {
        check_unit(w)?;
        Ok(self.value_at(w))
    }

    /// `Φ'(w)` for `|w| = 1`.
    pub fn eval_deriv(&self, w: Complex64) -> Result<Complex64> {
        check_unit(w)?;
        Ok(self.deriv_at(w))
    }

    /// Unchecked evaluation; `w` is assumed to lie on the unit circle.
    #[inline]
    pub(crate) fn value_at(&self, w: Complex64) -> Complex64 {
        // w^{-m} = conj(w)^m on the circle
        let q = w.conj().powu(self.fold as u32);
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in self.coeffs.iter().rev() {
            acc = (acc + a) * q;
        }
        w * (acc + self.lead)
    }

    #[inline]
    pub(crate) fn deriv_at(&self, w: Complex64) -> Complex64 {
        let m = self.fold as f64;
        let q = w.conj().powu(self.fold as u32);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &a) in self.coeffs.iter().enumerate().rev() {
            let k = (i + 1) as f64 * m - 1.0;
            acc = (acc + k * a) * q;
        }
        Complex64::new(self.lead, 0.0) - acc
    }
}

fn check_unit(w: Complex64) -> Result<()> {
    if (w.norm() - 1.0).abs() > UNIT_TOL {
        return Err(VStateError::Domain(format!(
            "evaluation point {w} is not on the unit circle (|w| = {})",
            w.norm()
        )));
    }
    Ok(())
}

/// Equispaced nodes on the unit circle.
///
/// Collocation nodes sit at `2πk/M`; quadrature nodes are offset by `shift`
/// (half a step by default) so the two sets never meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub modes: usize,
    pub nodes: usize,
    pub fold: usize,
    pub shift: f64,
}

impl SpectralGrid {
    /// Default grid with `M = 4Nm` nodes.
    pub fn new(modes: usize, fold: usize) -> Result<Self> {
        Self::with_nodes(modes, fold, 4 * modes * fold)
    }

    pub fn with_nodes(modes: usize, fold: usize, nodes: usize) -> Result<Self> {
        if modes == 0 || fold == 0 {
            return Err(VStateError::Domain("modes and fold must be positive".into()));
        }
        let required = 4 * modes * fold;
        if nodes < required {
            return Err(VStateError::Aliasing { nodes, modes, fold, required });
        }
        if !nodes.is_multiple_of(2 * fold) {
            return Err(VStateError::Domain(format!(
                "node count {nodes} must be a multiple of 2m = {}",
                2 * fold
            )));
        }
        Ok(Self { modes, nodes, fold, shift: PI / nodes as f64 })
    }

    /// The same discretisation with twice as many nodes.
    pub fn refined(&self) -> Self {
        Self { nodes: 2 * self.nodes, shift: PI / (2 * self.nodes) as f64, ..*self }
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.nodes as f64
    }

    pub fn collocation_angle(&self, k: usize) -> f64 {
        self.step() * k as f64
    }

    pub fn collocation_node(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.collocation_angle(k))
    }

    pub fn quadrature_node(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.collocation_angle(k) + self.shift)
    }
}

/// `e_n(w) = Im(conj(w)^n) = -sin(nθ)`.
#[inline]
pub fn sine_mode(n: usize, theta: f64) -> f64 {
    -(n as f64 * theta).sin()
}

/// Sine coefficients together with the largest cosine (non sine-type)
/// component seen by the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAnalysis {
    pub sine: Vec<f64>,
    pub cosine_residue: f64,
}

/// Discrete Fourier analysis of samples taken at the `M` collocation nodes,
/// returning the coefficients `β_n` of `e_{nm}` for `n = 1..=modes`.
pub fn analyze_modes(samples: &[f64], fold: usize, modes: usize) -> Result<ModeAnalysis> {
    let nodes = samples.len();
    let required = 4 * modes * fold;
    if nodes < required {
        return Err(VStateError::Aliasing { nodes, modes, fold, required });
    }
    let step = 2.0 * PI / nodes as f64;
    let scale = 2.0 / nodes as f64;
    let mut sine = Vec::with_capacity(modes);
    let mut cosine_residue: f64 = 0.0;
    for n in 1..=modes {
        let freq = (n * fold) as f64;
        let (mut s, mut c) = (0.0, 0.0);
        for (k, &g) in samples.iter().enumerate() {
            let (sn, cs) = (freq * step * k as f64).sin_cos();
            s += g * sn;
            c += g * cs;
        }
        sine.push(-scale * s);
        cosine_residue = cosine_residue.max((scale * c).abs());
    }
    Ok(ModeAnalysis { sine, cosine_residue })
}

pub fn project_modes(samples: &[f64], fold: usize, modes: usize) -> Result<Vec<f64>> {
    analyze_modes(samples, fold, modes).map(|a| a.sine)
}

/// Samples of `Σ β_n e_{nm}` at `nodes` equispaced collocation nodes.
pub fn synthesize_modes(coeffs: &[f64], fold: usize, nodes: usize) -> Vec<f64> {
    let step = 2.0 * PI / nodes as f64;
    (0..nodes)
        .map(|k| {
            let theta = step * k as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(i, b)| b * sine_mode((i + 1) * fold, theta))
                .sum()
        })
        .collect()
}
