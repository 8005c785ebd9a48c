//! Boundary-integral evaluation of the rotating-patch functional.
//!
//! For a doubly connected patch bounded by `Φ₁(T)` (outer) and `Φ₂(T)`
//! (inner), the functional is
//!
//! ```text
//! G_j(w) = Im{ ((1-λ) conj(Φ_j(w)) + I(Φ_j(w))) · w Φ_j'(w) },   w ∈ T,
//! I(z)   = ⨍ (z̄ - Φ̄₁)/(z - Φ₁) Φ₁' dξ - ⨍ (z̄ - Φ̄₂)/(z - Φ₂) Φ₂' dξ,
//! ```
//!
//! with `⨍ = (2πi)^{-1} ∮`. The integrals are computed with the trapezoid
//! rule on quadrature nodes shifted half a step from the collocation nodes;
//! the integrand is smooth and periodic so the rule is spectrally accurate.
//! The production path sums each integral over one sector only, folding the
//! m rotated copies of a node into a closed form, and evaluates `G` on the
//! interior collocation nodes of a half sector, which by m-fold and
//! reflection symmetry determine the whole sine expansion.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VStateError};
use crate::fourier::{FourierConformalMap, SpectralGrid};

/// A candidate rotating patch: both boundary maps together with `λ = 1 - 2Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchState {
    pub outer: FourierConformalMap,
    pub inner: FourierConformalMap,
    pub lambda: f64,
}

impl PatchState {
    pub fn new(outer: FourierConformalMap, inner: FourierConformalMap, lambda: f64) -> Result<Self> {
        let state = Self { outer, inner, lambda };
        state.validate()?;
        Ok(state)
    }

    /// The annulus `b < |z| < 1` with `n` zero modes per boundary.
    pub fn annulus(fold: usize, b: f64, lambda: f64, n: usize) -> Result<Self> {
        Self::new(
            FourierConformalMap::circle(1.0, fold, n)?,
            FourierConformalMap::circle(b, fold, n)?,
            lambda,
        )
    }

    /// Builds a state from interleaved coefficients `(a_{1,1}, a_{2,1}, a_{1,2}, ...)`.
    pub fn from_interleaved(fold: usize, b: f64, lambda: f64, coeffs: &[f64]) -> Result<Self> {
        if !coeffs.len().is_multiple_of(2) {
            return Err(VStateError::InvalidState("odd coefficient count".into()));
        }
        let outer = coeffs.iter().step_by(2).copied().collect();
        let inner = coeffs.iter().skip(1).step_by(2).copied().collect();
        Self::new(
            FourierConformalMap::new(1.0, fold, outer)?,
            FourierConformalMap::new(b, fold, inner)?,
            lambda,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer.fold() != self.inner.fold() {
            return Err(VStateError::InvalidState("boundary folds differ".into()));
        }
        if self.outer.lead() != 1.0 {
            return Err(VStateError::InvalidState("outer lead coefficient must be 1".into()));
        }
        let b = self.inner.lead();
        if !(b > 0.0 && b < 1.0) {
            return Err(VStateError::InvalidState(format!("b = {b} not in (0, 1)")));
        }
        if self.outer.trunc() != self.inner.trunc() {
            return Err(VStateError::InvalidState("boundary truncations differ".into()));
        }
        if !self.lambda.is_finite() {
            return Err(VStateError::InvalidState("lambda is not finite".into()));
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        self.inner.lead()
    }

    pub fn fold(&self) -> usize {
        self.outer.fold()
    }

    pub fn modes(&self) -> usize {
        self.outer.trunc()
    }

    pub fn omega(&self) -> f64 {
        (1.0 - self.lambda) / 2.0
    }

    pub fn boundary(&self, j: usize) -> &FourierConformalMap {
        if j == 0 {
            &self.outer
        } else {
            &self.inner
        }
    }

    pub fn interleaved(&self) -> Vec<f64> {
        self.outer
            .coeffs()
            .iter()
            .zip(self.inner.coeffs())
            .flat_map(|(a, b)| [*a, *b])
            .collect()
    }

    pub fn set_interleaved(&mut self, coeffs: &[f64]) {
        assert_eq!(coeffs.len(), 2 * self.modes(), "coefficient length mismatch");
        for (n, pair) in coeffs.chunks_exact(2).enumerate() {
            self.outer.coeffs_mut()[n] = pair[0];
            self.inner.coeffs_mut()[n] = pair[1];
        }
    }

    /// Sampled separation test: the inner boundary must stay strictly inside
    /// the outer one, and both maps must pass the univalence guard.
    pub fn check_geometry(&self, grid: &SpectralGrid) -> Result<()> {
        if !self.outer.is_univalent_safe() || !self.inner.is_univalent_safe() {
            return Err(VStateError::Geometry("univalence guard violated".into()));
        }
        let mut min_outer = f64::INFINITY;
        let mut max_inner: f64 = 0.0;
        for k in 0..grid.nodes {
            for w in [grid.collocation_node(k), grid.quadrature_node(k)] {
                min_outer = min_outer.min(self.outer.value_at(w).norm());
                max_inner = max_inner.max(self.inner.value_at(w).norm());
            }
        }
        if min_outer <= max_inner {
            return Err(VStateError::Geometry(format!(
                "boundaries intersect (min |Φ₁| = {min_outer}, max |Φ₂| = {max_inner})"
            )));
        }
        Ok(())
    }
}

/// Sine coefficients of both residual components and the largest collocation value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub outer_modes: Vec<f64>,
    pub inner_modes: Vec<f64>,
    pub sup_norm: f64,
}

impl ResidualVector {
    /// `(B_{1,1}, B_{2,1}, B_{1,2}, B_{2,2}, ...)`, matching [`PatchState::interleaved`].
    pub fn interleaved(&self) -> Vec<f64> {
        self.outer_modes
            .iter()
            .zip(&self.inner_modes)
            .flat_map(|(a, b)| [*a, *b])
            .collect()
    }

    pub fn mode(&self, n: usize) -> [f64; 2] {
        [self.outer_modes[n - 1], self.inner_modes[n - 1]]
    }

    pub fn max_coeff(&self) -> f64 {
        self.outer_modes
            .iter()
            .chain(&self.inner_modes)
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
    }
}

/// `I(z)` by the plain trapezoid rule over all `M` shifted quadrature nodes
/// of both boundaries. `z` may be any point off the quadrature images.
pub fn eval_i(state: &PatchState, z: Complex64, grid: &SpectralGrid) -> Result<Complex64> {
    state.check_geometry(grid)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (sign, map) in [(1.0, &state.outer), (-1.0, &state.inner)] {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..grid.nodes {
            let xi = grid.quadrature_node(l);
            let u = map.value_at(xi);
            let diff = z - u;
            if diff.norm() < 1e-14 {
                return Err(VStateError::NodeCollision);
            }
            acc += diff.conj() / diff * map.deriv_at(xi) * xi;
        }
        total += sign * acc / grid.nodes as f64;
    }
    Ok(total)
}

/// `G(λ, f)` projected on `e_{nm}`, `n = 1..=N`.
pub fn eval_g(state: &PatchState, grid: &SpectralGrid) -> Result<ResidualVector> {
    ResidualOperator::new(*grid)?.residual(state)
}

/// Quadrature data of one boundary on a single sector.
struct SectorQuadrature {
    /// `u^m` at each sector node
    um: Vec<Complex64>,
    /// `ξ Φ'(ξ) / Φ(ξ)`
    p: Vec<Complex64>,
    /// `ξ Φ'(ξ) conj(Φ(ξ))`
    r: Vec<Complex64>,
    /// `Σ p`
    p_sum: Complex64,
}

/// Precomputed tables for repeated residual evaluations on one grid.
#[derive(Debug, Clone)]
pub struct ResidualOperator {
    grid: SpectralGrid,
    /// interior half-sector collocation nodes, `k = 1..L-1`
    eval_nodes: Vec<Complex64>,
    /// quadrature nodes of the first sector
    sector_nodes: Vec<Complex64>,
    /// `sin(π n k / L)` indexed by `(n-1)·(L-1) + (k-1)`
    sines: Vec<f64>,
    half_sector: usize,
}

impl ResidualOperator {
    pub fn new(grid: SpectralGrid) -> Result<Self> {
        let m = grid.fold;
        if !grid.nodes.is_multiple_of(2 * m) {
            return Err(VStateError::Domain("node count must be a multiple of 2m".into()));
        }
        let half_sector = grid.nodes / (2 * m);
        let eval_nodes = (1..half_sector).map(|k| grid.collocation_node(k)).collect();
        let sector_nodes = (0..grid.nodes / m).map(|q| grid.quadrature_node(q)).collect();
        let mut sines = Vec::with_capacity(grid.modes * (half_sector - 1));
        for n in 1..=grid.modes {
            for k in 1..half_sector {
                let arg = std::f64::consts::PI * (n * k) as f64 / half_sector as f64;
                sines.push(arg.sin());
            }
        }
        Ok(Self { grid, eval_nodes, sector_nodes, sines, half_sector })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    fn sector(&self, map: &FourierConformalMap) -> SectorQuadrature {
        let m = self.grid.fold as u32;
        let n = self.sector_nodes.len();
        let mut out = SectorQuadrature {
            um: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            p_sum: Complex64::new(0.0, 0.0),
        };
        for &xi in &self.sector_nodes {
            let u = map.value_at(xi);
            let wt = xi * map.deriv_at(xi);
            let p = wt / u;
            out.um.push(u.powu(m));
            out.p.push(p);
            out.r.push(wt * u.conj());
            out.p_sum += p;
        }
        out
    }

    /// `I(z)` from the sector-folded trapezoid sum.
    ///
    /// Summing `(z̄ ωᵏ - ū)/(z - ωᵏu)` over the m rotations `ωᵏ` gives
    /// `(|z|²/u - ū)·m z^{m-1}/(z^m - u^m) - m z̄/u`.
    fn folded_i(&self, z: Complex64, quads: &[SectorQuadrature; 2]) -> Complex64 {
        let m = self.grid.fold;
        let mf = m as f64;
        let zm1 = z.powu(m as u32 - 1);
        let zm = zm1 * z;
        let z2 = z.norm_sqr();
        let mut total = Complex64::new(0.0, 0.0);
        for (sign, quad) in [1.0, -1.0].into_iter().zip(quads) {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..quad.um.len() {
                acc += (quad.p[q] * z2 - quad.r[q]) / (zm - quad.um[q]);
            }
            total += sign * (acc * zm1 - z.conj() * quad.p_sum) * mf;
        }
        total / self.grid.nodes as f64
    }

    fn value_at(
        &self,
        state: &PatchState,
        j: usize,
        w: Complex64,
        quads: &[SectorQuadrature; 2],
    ) -> f64 {
        let map = state.boundary(j);
        let z = map.value_at(w);
        let dz = map.deriv_at(w);
        let i = self.folded_i(z, quads);
        (((1.0 - state.lambda) * z.conj() + i) * w * dz).im
    }

    fn quadratures(&self, state: &PatchState) -> [SectorQuadrature; 2] {
        [self.sector(&state.outer), self.sector(&state.inner)]
    }

    fn check_state(&self, state: &PatchState) -> Result<()> {
        if state.fold() != self.grid.fold {
            return Err(VStateError::InvalidState("state fold differs from grid fold".into()));
        }
        if state.modes() > self.grid.modes {
            return Err(VStateError::InvalidState(format!(
                "state has {} modes but grid resolves {}",
                state.modes(),
                self.grid.modes
            )));
        }
        state.check_geometry(&self.grid)
    }

    /// Residual values `(G₁, G₂)` on the interior half-sector nodes
    /// `θ_k = 2πk/M`, `k = 1..M/(2m)-1`.
    pub fn half_sector_values(&self, state: &PatchState) -> Result<Vec<[f64; 2]>> {
        self.check_state(state)?;
        let quads = self.quadratures(state);
        let values: Vec<[f64; 2]> = self
            .eval_nodes
            .iter()
            .map(|&w| [self.value_at(state, 0, w, &quads), self.value_at(state, 1, w, &quads)])
            .collect();
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(VStateError::NodeCollision);
        }
        Ok(values)
    }

    /// Residual values on every collocation node, without using the
    /// collocation symmetry. Used for validation.
    pub fn collocation_values(&self, state: &PatchState) -> Result<Vec<[f64; 2]>> {
        self.check_state(state)?;
        let quads = self.quadratures(state);
        Ok((0..self.grid.nodes)
            .map(|k| {
                let w = self.grid.collocation_node(k);
                [self.value_at(state, 0, w, &quads), self.value_at(state, 1, w, &quads)]
            })
            .collect())
    }

    fn project(&self, values: &[[f64; 2]]) -> ResidualVector {
        let l1 = self.half_sector - 1;
        let scale = -4.0 * self.grid.fold as f64 / self.grid.nodes as f64;
        let mut outer = Vec::with_capacity(self.grid.modes);
        let mut inner = Vec::with_capacity(self.grid.modes);
        for n in 0..self.grid.modes {
            let row = &self.sines[n * l1..(n + 1) * l1];
            let (mut s1, mut s2) = (0.0, 0.0);
            for (s, v) in row.iter().zip(values) {
                s1 += s * v[0];
                s2 += s * v[1];
            }
            outer.push(scale * s1);
            inner.push(scale * s2);
        }
        let sup_norm = values.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        ResidualVector { outer_modes: outer, inner_modes: inner, sup_norm }
    }

    pub fn residual(&self, state: &PatchState) -> Result<ResidualVector> {
        let values = self.half_sector_values(state)?;
        let mut r = self.project(&values);
        r.outer_modes.truncate(state.modes().max(1).min(self.grid.modes));
        r.inner_modes.truncate(r.outer_modes.len());
        Ok(r)
    }

    /// Exact `∂_λ G = -Im{conj(Φ_j) w Φ_j'}` projected on the sine modes.
    pub fn lambda_derivative(&self, state: &PatchState) -> ResidualVector {
        let values: Vec<[f64; 2]> = self
            .eval_nodes
            .iter()
            .map(|&w| {
                let f = |map: &FourierConformalMap| -(map.value_at(w).conj() * w * map.deriv_at(w)).im;
                [f(&state.outer), f(&state.inner)]
            })
            .collect();
        let mut r = self.project(&values);
        r.outer_modes.truncate(state.modes().max(1).min(self.grid.modes));
        r.inner_modes.truncate(r.outer_modes.len());
        r
    }
}
