//! Numerical Lyapunov-Schmidt reduction at `λ*`.
//!
//! For given `(λ, t)` the coefficients are split as
//! `mode 1 = t·v + α·(1, 0)`, modes `n ≥ 2` free. The complementary equations
//! (mode-1 residual along the range of `M_m(λ*)`, all higher modes) are
//! solved for `(α, A_2, ..., A_N)`; what remains is the scalar
//! `H(λ, t) = ⟨B_1, Ŵ⟩`. `H` vanishes identically at `t = 0` and is odd in
//! `t`, and the reduced function is `F(λ, t) = H(λ, t)/t`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VStateError};
use crate::fourier::SpectralGrid;
use crate::linear::{kernel_data, matrix_mn, KernelData, Sign};
use crate::residual::{PatchState, ResidualOperator};

/// Amplitude used to extrapolate `F(λ, 0)` from `H(λ, ±τ)/τ`.
const ZERO_T_STEP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ReducedSolver {
    op: ResidualOperator,
    kernel: KernelData,
    range: [f64; 2],
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSolution {
    /// `⟨B_1, Ŵ⟩`
    pub component: f64,
    /// `(α, A_2, ..., A_N)`
    pub complement: Vec<f64>,
    pub state: PatchState,
    pub iterations: usize,
}

impl ReducedSolver {
    pub fn new(m: usize, b: f64, sign: Sign, grid: SpectralGrid) -> Result<Self> {
        let kernel = kernel_data(m, b, sign)?;
        if grid.fold != m {
            return Err(VStateError::Domain("grid fold differs from m".into()));
        }
        Ok(Self {
            op: ResidualOperator::new(grid)?,
            kernel,
            range: kernel.range_direction(),
            tol: 1e-15,
            max_iter: 60,
        })
    }

    pub fn kernel(&self) -> &KernelData {
        &self.kernel
    }

    fn modes(&self) -> usize {
        self.op.grid().modes
    }

    fn state(&self, lambda: f64, t: f64, u: &[f64]) -> Result<PatchState> {
        let mut coeffs = Vec::with_capacity(2 * self.modes());
        coeffs.push(t * self.kernel.v1 + u[0]);
        coeffs.push(t * self.kernel.v2);
        coeffs.extend_from_slice(&u[1..]);
        PatchState::from_interleaved(self.kernel.m, self.kernel.b, lambda, &coeffs)
    }

    /// Complementary equations and the cokernel component.
    fn equations(&self, lambda: f64, t: f64, u: &[f64]) -> Result<(Vec<f64>, f64, PatchState)> {
        let state = self.state(lambda, t, u)?;
        let r = self.op.residual(&state)?.interleaved();
        let mut e = Vec::with_capacity(u.len());
        e.push(r[0] * self.range[0] + r[1] * self.range[1]);
        e.extend_from_slice(&r[2..]);
        let h = r[0] * self.kernel.what_hat[0] + r[1] * self.kernel.what_hat[1];
        Ok((e, h, state))
    }

    /// Linearization of the complementary equations at the annulus.
    fn preconditioner(&self, lambda: f64) -> Result<(f64, Vec<[[f64; 2]; 2]>)> {
        let m = self.kernel.m;
        let b = self.kernel.b;
        let first = matrix_mn(m, lambda, b)?.apply([1.0, 0.0]);
        let d0 = first[0] * self.range[0] + first[1] * self.range[1];
        let mut blocks = Vec::with_capacity(self.modes() - 1);
        for n in 2..=self.modes() {
            let blk = matrix_mn(n * m, lambda, b)?;
            if blk.det == 0.0 {
                return Err(VStateError::Resonance { n: n * m, det: 0.0 });
            }
            let e = blk.entries;
            blocks.push([[e[1][1] / blk.det, -e[0][1] / blk.det], [-e[1][0] / blk.det, e[0][0] / blk.det]]);
        }
        Ok((d0, blocks))
    }

    /// Solves the complementary equations, seeded from `seed` or zero.
    pub fn solve(&self, lambda: f64, t: f64, seed: Option<&[f64]>) -> Result<ReducedSolution> {
        let dim = 2 * self.modes() - 1;
        let mut u = seed.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; dim]);
        if u.len() != dim {
            return Err(VStateError::Domain("seed length mismatch".into()));
        }
        let (d0, inv) = self.preconditioner(lambda)?;
        let mut prev = f64::INFINITY;
        for iter in 0..self.max_iter {
            let (e, h, state) = self.equations(lambda, t, &u)?;
            let norm = e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if norm < self.tol {
                return Ok(ReducedSolution { component: h, complement: u, state, iterations: iter });
            }
            if norm > 0.8 * prev {
                // chord iteration stalled; finish with full Newton
                return self.newton(lambda, t, u, iter);
            }
            prev = norm;
            u[0] -= e[0] / d0;
            for (k, blk) in inv.iter().enumerate() {
                let (y0, y1) = (e[1 + 2 * k], e[2 + 2 * k]);
                u[1 + 2 * k] -= blk[0][0] * y0 + blk[0][1] * y1;
                u[2 + 2 * k] -= blk[1][0] * y0 + blk[1][1] * y1;
            }
        }
        self.newton(lambda, t, u, self.max_iter)
    }

    fn newton(&self, lambda: f64, t: f64, mut u: Vec<f64>, done: usize) -> Result<ReducedSolution> {
        let dim = u.len();
        let h = 1e-7;
        let mut best = f64::INFINITY;
        for iter in 0..20 {
            let (e, comp, state) = self.equations(lambda, t, &u)?;
            let norm = e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if norm < self.tol || (iter > 0 && norm < 1e-13 && norm >= best) {
                return Ok(ReducedSolution { component: comp, complement: u, state, iterations: done + iter });
            }
            best = best.min(norm);
            let mut jac = DMatrix::zeros(dim, dim);
            for col in 0..dim {
                let mut up = u.clone();
                up[col] += h;
                let mut dn = u.clone();
                dn[col] -= h;
                let ep = self.equations(lambda, t, &up)?.0;
                let en = self.equations(lambda, t, &dn)?.0;
                for row in 0..dim {
                    jac[(row, col)] = (ep[row] - en[row]) / (2.0 * h);
                }
            }
            let dx = jac.lu().solve(&DVector::from_vec(e)).ok_or_else(|| VStateError::ReductionSolve {
                lambda,
                t,
                reason: "singular complementary Jacobian".into(),
            })?;
            for i in 0..dim {
                u[i] -= dx[i];
            }
        }
        Err(VStateError::ReductionSolve { lambda, t, reason: format!("no convergence after {} iterations", done + 20) })
    }

    /// `H(λ, t) = ⟨B_1, Ŵ⟩` after solving the complementary equations.
    pub fn reduced_component(&self, lambda: f64, t: f64) -> Result<f64> {
        Ok(self.solve(lambda, t, None)?.component)
    }

    /// `F(λ, t) = H(λ, t)/t`, extended to `t = 0` by Richardson extrapolation.
    pub fn reduced_function(&self, lambda: f64, t: f64) -> Result<f64> {
        if t != 0.0 {
            return Ok(self.reduced_component(lambda, t)? / t);
        }
        let tau = ZERO_T_STEP;
        let h1 = self.reduced_component(lambda, tau)? / tau;
        let h2 = self.reduced_component(lambda, 2.0 * tau)? / (2.0 * tau);
        Ok((4.0 * h1 - h2) / 3.0)
    }
}

/// Finite-difference Taylor data of the reduced function at `(λ*, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedTaylor {
    pub value: f64,
    pub d_lambda: f64,
    pub d_t: f64,
    pub d_lambda_lambda: f64,
    pub d_tt: f64,
    pub d_lambda_t: f64,
}

/// Richardson-extrapolated central differences with steps `h_lambda`, `h_t`.
pub fn reduced_taylor(solver: &ReducedSolver, h_lambda: f64, h_t: f64) -> Result<ReducedTaylor> {
    let l0 = solver.kernel().lambda_star;
    let f = |dl: f64, t: f64| solver.reduced_function(l0 + dl, t);
    let value = f(0.0, 0.0)?;
    let rich = |d1: f64, d2: f64| (4.0 * d1 - d2) / 3.0;

    let (p1, m1, p2, m2) = (f(h_lambda, 0.0)?, f(-h_lambda, 0.0)?, f(2.0 * h_lambda, 0.0)?, f(-2.0 * h_lambda, 0.0)?);
    let d_lambda = rich((p1 - m1) / (2.0 * h_lambda), (p2 - m2) / (4.0 * h_lambda));
    let d_lambda_lambda = rich(
        (p1 - 2.0 * value + m1) / (h_lambda * h_lambda),
        (p2 - 2.0 * value + m2) / (4.0 * h_lambda * h_lambda),
    );

    let (tp1, tm1, tp2, tm2) = (f(0.0, h_t)?, f(0.0, -h_t)?, f(0.0, 2.0 * h_t)?, f(0.0, -2.0 * h_t)?);
    let d_t = rich((tp1 - tm1) / (2.0 * h_t), (tp2 - tm2) / (4.0 * h_t));
    let d_tt = rich((tp1 - 2.0 * value + tm1) / (h_t * h_t), (tp2 - 2.0 * value + tm2) / (4.0 * h_t * h_t));

    let cross = |hl: f64, ht: f64| -> Result<f64> {
        Ok((f(hl, ht)? - f(hl, -ht)? - f(-hl, ht)? + f(-hl, -ht)?) / (4.0 * hl * ht))
    };
    let d_lambda_t = rich(cross(h_lambda, h_t)?, cross(2.0 * h_lambda, 2.0 * h_t)?);

    Ok(ReducedTaylor { value, d_lambda, d_t, d_lambda_lambda, d_tt, d_lambda_t })
}
