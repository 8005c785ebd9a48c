//! Newton correction of the discretized V-state equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VStateError};
use crate::residual::{PatchState, ResidualOperator};

/// Central finite-difference Jacobian `∂B/∂a` in interleaved coefficients.
pub fn jacobian_fd(state: &PatchState, op: &ResidualOperator, h: f64) -> Result<DMatrix<f64>> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(VStateError::Domain(format!("finite-difference step {h} outside [1e-8, 1e-4]")));
    }
    let dim = 2 * state.modes();
    let base = state.interleaved();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut probe = state.clone();
    let mut x = base.clone();
    for col in 0..dim {
        x[col] = base[col] + h;
        probe.set_interleaved(&x);
        let plus = op.residual(&probe)?.interleaved();
        x[col] = base[col] - h;
        probe.set_interleaved(&x);
        let minus = op.residual(&probe)?.interleaved();
        x[col] = base[col];
        for row in 0..dim {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Extra equation closing the system when λ is free.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// λ held at its current value; unknowns are the coefficients only.
    FixedLambda,
    /// `a_{2,1} = t`.
    PinnedT(f64),
    /// `τ · (S x - y_prev) = ds` with `S` the scaling of [`Metric`].
    Arclength { prev: Vec<f64>, tangent: Vec<f64>, ds: f64 },
}

/// Scaled coordinates `y = (a/‖v‖, λ)` used for arclength and distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub coeff_scale: f64,
}

impl Metric {
    pub fn new(v_norm: f64) -> Self {
        Self { coeff_scale: 1.0 / v_norm }
    }

    /// `y` from a state, coefficients first and λ last.
    pub fn scaled(&self, state: &PatchState) -> Vec<f64> {
        let mut y: Vec<f64> = state.interleaved().iter().map(|a| a * self.coeff_scale).collect();
        y.push(state.lambda);
        y
    }

    pub fn unscale(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let n = y.len() - 1;
        (y[..n].iter().map(|a| a / self.coeff_scale).collect(), y[n])
    }

    pub fn distance(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// singular values ratio below which the Jacobian is reported singular
    pub rcond_min: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 12, fd_step: 1e-6, rcond_min: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub state: PatchState,
    pub iterations: usize,
    /// largest residual coefficient
    pub residual: f64,
    /// largest collocation value
    pub residual_sup: f64,
    pub jacobian_builds: usize,
}

struct System<'a> {
    op: &'a ResidualOperator,
    constraint: &'a Constraint,
    metric: Metric,
    template: PatchState,
}

impl System<'_> {
    fn free_lambda(&self) -> bool {
        !matches!(self.constraint, Constraint::FixedLambda)
    }

    fn dim(&self) -> usize {
        2 * self.template.modes() + usize::from(self.free_lambda())
    }

    fn state(&self, x: &[f64]) -> PatchState {
        let n = 2 * self.template.modes();
        let mut s = self.template.clone();
        s.set_interleaved(&x[..n]);
        if self.free_lambda() {
            s.lambda = x[n];
        }
        s
    }

    fn unknowns(&self, state: &PatchState) -> Vec<f64> {
        let mut x = state.interleaved();
        if self.free_lambda() {
            x.push(state.lambda);
        }
        x
    }

    fn constraint_value(&self, x: &[f64]) -> f64 {
        match self.constraint {
            Constraint::FixedLambda => 0.0,
            Constraint::PinnedT(t) => x[1] - t,
            Constraint::Arclength { prev, tangent, ds } => {
                let n = x.len() - 1;
                let mut acc = -ds;
                for i in 0..n {
                    acc += tangent[i] * (x[i] * self.metric.coeff_scale - prev[i]);
                }
                acc + tangent[n] * (x[n] - prev[n])
            }
        }
    }

    /// Returns `(F, max |B|, sup norm)`.
    fn residual(&self, x: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let r = self.op.residual(&self.state(x))?;
        let mut f = r.interleaved();
        let max = r.max_coeff();
        if self.free_lambda() {
            f.push(self.constraint_value(x));
        }
        Ok((f, max, r.sup_norm))
    }

    fn jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let state = self.state(x);
        let jc = jacobian_fd(&state, self.op, h)?;
        let n = jc.nrows();
        if !self.free_lambda() {
            return Ok(jc);
        }
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&jc);
        let dl = self.op.lambda_derivative(&state).interleaved();
        for (row, v) in dl.iter().enumerate() {
            jac[(row, n)] = *v;
        }
        match self.constraint {
            Constraint::FixedLambda => unreachable!(),
            Constraint::PinnedT(_) => jac[(n, 1)] = 1.0,
            Constraint::Arclength { tangent, .. } => {
                for i in 0..n {
                    jac[(n, i)] = tangent[i] * self.metric.coeff_scale;
                }
                jac[(n, n)] = tangent[n];
            }
        }
        Ok(jac)
    }
}

/// Ratio of extreme singular values of `∂B/∂a` at `state`.
pub fn jacobian_rcond(state: &PatchState, op: &ResidualOperator, h: f64) -> Result<f64> {
    Ok(rcond(&jacobian_fd(state, op, h)?))
}

pub(crate) fn rcond(jac: &DMatrix<f64>) -> f64 {
    let sv = jac.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

/// Solves `G = 0` (plus the constraint) by chord-Newton iterations with a
/// finite-difference Jacobian, rebuilt whenever the residual stalls.
pub fn newton_correct(
    guess: &PatchState,
    constraint: &Constraint,
    op: &ResidualOperator,
    metric: Metric,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let sys = System { op, constraint, metric, template: guess.clone() };
    let mut x = sys.unknowns(guess);
    let dim = sys.dim();
    let mut lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> = None;
    let mut builds = 0;
    let mut prev_norm = f64::INFINITY;
    let (mut f, mut max, mut sup) = sys.residual(&x)?;
    for iter in 0..=opts.max_iter {
        let norm = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max < opts.tol && norm < opts.tol {
            return Ok(NewtonReport {
                state: sys.state(&x),
                iterations: iter,
                residual: max,
                residual_sup: sup,
                jacobian_builds: builds,
            });
        }
        if iter == opts.max_iter || !norm.is_finite() {
            break;
        }
        if lu.is_none() || norm > 0.25 * prev_norm {
            let jac = sys.jacobian(&x, opts.fd_step)?;
            builds += 1;
            let rc = rcond(&jac);
            if rc < opts.rcond_min {
                return Err(VStateError::SingularJacobian { rcond: rc });
            }
            lu = Some(jac.lu());
        }
        prev_norm = norm;
        let rhs = DVector::from_vec(f.clone());
        let dx = lu
            .as_ref()
            .and_then(|l| l.solve(&rhs))
            .ok_or(VStateError::SingularJacobian { rcond: 0.0 })?;
        debug_assert_eq!(dx.len(), dim);
        for i in 0..dim {
            x[i] -= dx[i];
        }
        (f, max, sup) = sys.residual(&x)?;
    }
    Err(VStateError::NewtonFailure { iterations: opts.max_iter, residual: max })
}

/// Tangent of the solution curve in scaled coordinates, oriented along `hint`.
pub fn tangent(
    state: &PatchState,
    op: &ResidualOperator,
    metric: Metric,
    hint: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let jc = jacobian_fd(state, op, h)?;
    let n = jc.nrows();
    let dl = op.lambda_derivative(state).interleaved();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            // columns with respect to the scaled coefficients
            a[(i, j)] = jc[(i, j)] / metric.coeff_scale;
        }
        a[(i, n)] = dl[i];
    }
    for j in 0..=n {
        a[(n, j)] = hint[j];
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let tau = a.lu().solve(&rhs).ok_or(VStateError::SingularJacobian { rcond: 0.0 })?;
    let norm = tau.norm();
    let sign = if tau.iter().zip(hint).map(|(x, y)| x * y).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    Ok(tau.iter().map(|x| sign * x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::SpectralGrid;
    use crate::linear::{kernel_data, trivial_jacobian, Sign};

    #[test]
    fn fd_jacobian_at_annulus_is_block_diagonal() {
        let (m, b, lambda, n) = (3, 0.4, 0.6, 6);
        let op = ResidualOperator::new(SpectralGrid::new(n, m).unwrap()).unwrap();
        let state = PatchState::annulus(m, b, lambda, n).unwrap();
        let fd = jacobian_fd(&state, &op, 1e-6).unwrap();
        let exact = trivial_jacobian(lambda, b, m, n).unwrap().to_dense();
        assert!((fd - exact).abs().max() < 1e-7);
    }

    #[test]
    fn trivial_guess_converges_immediately() {
        let op = ResidualOperator::new(SpectralGrid::new(6, 4).unwrap()).unwrap();
        let state = PatchState::annulus(4, 0.63, 0.4, 6).unwrap();
        let r = newton_correct(&state, &Constraint::FixedLambda, &op, Metric::new(1.0), &NewtonOptions::default())
            .unwrap();
        assert!(r.iterations <= 1);
        assert!(r.state.interleaved().iter().all(|a| *a == 0.0));
    }

    #[test]
    fn singular_at_eigenvalue() {
        let k = kernel_data(4, 0.63, Sign::Plus).unwrap();
        let op = ResidualOperator::new(SpectralGrid::new(6, 4).unwrap()).unwrap();
        let state = PatchState::annulus(4, 0.63, k.lambda_star, 6).unwrap();
        assert!(jacobian_rcond(&state, &op, 1e-6).unwrap() < 1e-10);
        let mut near = state.clone();
        near.outer.coeffs_mut()[0] = 1e-9;
        let r = newton_correct(&near, &Constraint::FixedLambda, &op, Metric::new(1.0), &NewtonOptions::default());
        assert!(matches!(r, Err(VStateError::SingularJacobian { .. })), "{r:?}");
    }

    #[test]
    fn rejects_out_of_range_step() {
        let op = ResidualOperator::new(SpectralGrid::new(2, 3).unwrap()).unwrap();
        let state = PatchState::annulus(3, 0.4, 0.6, 2).unwrap();
        assert!(jacobian_fd(&state, &op, 1e-2).is_err());
    }
}
