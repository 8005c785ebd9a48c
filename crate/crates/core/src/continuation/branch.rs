//! Branch switching at `λ_m^±` and pseudo-arclength tracing of the loop.

use serde::{Deserialize, Serialize};

use super::newton::{newton_correct, tangent, Constraint, Metric, NewtonOptions};
use crate::error::{Result, VStateError};
use crate::fourier::SpectralGrid;
use crate::linear::{discriminant, kernel_data, KernelData, Sign};
use crate::residual::{PatchState, ResidualOperator};

/// One converged V-state along a branch. `t` is the inner mode-1
/// coefficient `a_{2,1}`, the amplitude along `v_m` (whose second entry is 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub omega: f64,
    pub coeffs: Vec<f64>,
    pub t: f64,
    pub residual_sup: f64,
    pub arclength: f64,
}

impl BranchPoint {
    pub fn from_state(state: &PatchState, residual_sup: f64, arclength: f64) -> Self {
        let coeffs = state.interleaved();
        Self {
            lambda: state.lambda,
            omega: state.omega(),
            t: coeffs.get(1).copied().unwrap_or(0.0),
            coeffs,
            residual_sup,
            arclength,
        }
    }

    pub fn state(&self, m: usize, b: f64) -> Result<PatchState> {
        PatchState::from_interleaved(m, b, self.lambda, &self.coeffs)
    }

    /// The same patch rotated by `π/m`: `a_{j,n} → (-1)^n a_{j,n}`.
    pub fn reflected(&self) -> BranchPoint {
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| if (i / 2) % 2 == 0 { -a } else { *a })
            .collect();
        BranchPoint { t: -self.t, coeffs, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Closed,
    MaxSteps,
    ArclengthBudget,
    Stalled,
    GuardViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub m: usize,
    pub b: f64,
    pub origin_sign: Sign,
    pub modes: usize,
    pub nodes: usize,
    pub points: Vec<BranchPoint>,
    pub closed: bool,
    /// λ where the branch meets the annulus family; the starting eigenvalue comes first
    pub trivial_hits: Vec<f64>,
    pub termination: Termination,
    pub ds0: f64,
    pub v_norm: f64,
}

impl Branch {
    pub fn metric(&self) -> Metric {
        Metric::new(self.v_norm)
    }

    fn scaled(&self, p: &BranchPoint) -> Vec<f64> {
        let s = self.metric().coeff_scale;
        let mut y: Vec<f64> = p.coeffs.iter().map(|a| a * s).collect();
        y.push(p.lambda);
        y
    }

    /// Vertices of the branch polyline in scaled coordinates.
    pub fn polyline(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| self.scaled(p)).collect()
    }

    pub fn reflected_polyline(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| self.scaled(&p.reflected())).collect()
    }

    /// Hausdorff distance between the branch and its reflection `t → -t`.
    pub fn reflection_distance(&self) -> f64 {
        hausdorff(&self.polyline(), &self.reflected_polyline(), self.closed)
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.lambda), hi.max(p.lambda)))
    }

    pub fn max_abs_t(&self) -> f64 {
        self.points.iter().fold(0.0f64, |acc, p| acc.max(p.t.abs()))
    }
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (mut ab2, mut apab) = (0.0, 0.0);
    for i in 0..p.len() {
        let d = b[i] - a[i];
        ab2 += d * d;
        apab += (p[i] - a[i]) * d;
    }
    let s = if ab2 > 0.0 { (apab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    p.iter()
        .zip(a.iter().zip(b))
        .map(|(pi, (ai, bi))| {
            let d = pi - (ai + s * (bi - ai));
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn point_polyline_distance(p: &[f64], line: &[Vec<f64>], closed: bool) -> f64 {
    if line.len() == 1 {
        return Metric::distance(p, &line[0]);
    }
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        best = best.min(point_segment_distance(p, &w[0], &w[1]));
    }
    if closed {
        best = best.min(point_segment_distance(p, &line[line.len() - 1], &line[0]));
    }
    best
}

/// Symmetric Hausdorff distance between two polylines, measured from vertices.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], closed: bool) -> f64 {
    let one = a.iter().fold(0.0f64, |acc, p| acc.max(point_polyline_distance(p, b, closed)));
    let two = b.iter().fold(0.0f64, |acc, p| acc.max(point_polyline_distance(p, a, closed)));
    one.max(two)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub max_arclength: f64,
    pub dt0: f64,
    pub t_tol: f64,
    /// pinned amplitude used to locate crossings of the annulus family
    pub hit_step: f64,
    /// accepted points must satisfy this on the doubled grid
    pub refined_tol: f64,
    pub newton: NewtonOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            ds0: 1e-3,
            ds_min: 1e-7,
            ds_max: 1e-2,
            max_steps: 5000,
            max_arclength: f64::INFINITY,
            dt0: 1e-3,
            t_tol: 1e-7,
            hit_step: 1e-3,
            refined_tol: 1e-10,
            newton: NewtonOptions::default(),
        }
    }
}

impl TraceOptions {
    pub fn with_ds0(ds0: f64) -> Self {
        Self { ds0, ds_max: 10.0 * ds0, ..Self::default() }
    }
}

fn check_bifurcation(m: usize, b: f64) -> Result<KernelData> {
    let delta = discriminant(m, b)?;
    if !(delta > 0.0) || m < 3 {
        return Err(VStateError::NoBifurcation { m, b, delta });
    }
    kernel_data(m, b, Sign::Plus)
}

/// First nontrivial point: `a_{2,1}` pinned to `dt0`, λ free, started from
/// `dt0·v_m` at `λ_m^sign`.
pub fn branch_switch(
    m: usize,
    b: f64,
    sign: Sign,
    dt0: f64,
    grid: &SpectralGrid,
    opts: &NewtonOptions,
) -> Result<(BranchPoint, PatchState)> {
    check_bifurcation(m, b)?;
    let kernel = kernel_data(m, b, sign)?;
    let op = ResidualOperator::new(*grid)?;
    let mut guess = PatchState::annulus(m, b, kernel.lambda_star, grid.modes)?;
    guess.outer.coeffs_mut()[0] = dt0 * kernel.v1;
    guess.inner.coeffs_mut()[0] = dt0 * kernel.v2;
    let rep = newton_correct(&guess, &Constraint::PinnedT(dt0), &op, Metric::new(kernel.v_norm()), opts)?;
    Ok((BranchPoint::from_state(&rep.state, rep.residual_sup, 0.0), rep.state))
}

struct Tracer<'a> {
    op: ResidualOperator,
    fine: ResidualOperator,
    metric: Metric,
    opts: &'a TraceOptions,
}

impl Tracer<'_> {
    fn state_from(&self, template: &PatchState, y: &[f64]) -> Result<PatchState> {
        let (c, lambda) = self.metric.unscale(y);
        PatchState::from_interleaved(template.fold(), template.b(), lambda, &c)
    }

    /// λ where the branch crosses `t = 0` between two points, from pinned
    /// solves at `t = h, 2h` and the evenness of λ in t.
    fn refine_hit(&self, a: &PatchState, b: &PatchState) -> Result<f64> {
        let near = if a.inner.coeffs()[0].abs() < b.inner.coeffs()[0].abs() { a } else { b };
        let mut guess = near.clone();
        if guess.inner.coeffs()[0] < 0.0 {
            guess = BranchPoint::from_state(near, 0.0, 0.0).reflected().state(near.fold(), near.b())?;
        }
        let h = self.opts.hit_step;
        let s1 = newton_correct(&guess, &Constraint::PinnedT(h), &self.op, self.metric, &self.opts.newton)?.state;
        let s2 = newton_correct(&s1, &Constraint::PinnedT(2.0 * h), &self.op, self.metric, &self.opts.newton)?.state;
        Ok((4.0 * s1.lambda - s2.lambda) / 3.0)
    }
}

/// Pseudo-arclength continuation from `λ_m^sign` until the branch closes,
/// stalls, leaves the guarded region or exhausts the step budget.
pub fn trace_loop(m: usize, b: f64, sign: Sign, grid: &SpectralGrid, opts: &TraceOptions) -> Result<Branch> {
    let (first, state0) = branch_switch(m, b, sign, opts.dt0, grid, &opts.newton)?;
    let kernel = kernel_data(m, b, sign)?;
    let metric = Metric::new(kernel.v_norm());
    let tracer = Tracer {
        op: ResidualOperator::new(*grid)?,
        fine: ResidualOperator::new(grid.refined())?,
        metric,
        opts,
    };

    let dim = 2 * grid.modes + 1;
    let mut hint = vec![0.0; dim];
    hint[0] = kernel.v1 / kernel.v_norm();
    hint[1] = kernel.v2 / kernel.v_norm();
    let mut tau = tangent(&state0, &tracer.op, metric, &hint, opts.newton.fd_step)?;

    let first_sup = tracer.fine.residual(&state0)?.sup_norm;
    let mut branch = Branch {
        m,
        b,
        origin_sign: sign,
        modes: grid.modes,
        nodes: grid.nodes,
        points: vec![BranchPoint { residual_sup: first_sup, ..first }],
        closed: false,
        trivial_hits: vec![kernel.lambda_star],
        termination: Termination::MaxSteps,
        ds0: opts.ds0,
        v_norm: kernel.v_norm(),
    };

    let y_first = metric.scaled(&state0);
    let mut state = state0;
    let mut ds = opts.ds0;
    let mut easy = 0;
    let mut arclength = 0.0;
    let mut steps = 0;
    while steps < opts.max_steps {
        steps += 1;
        let y_prev = metric.scaled(&state);
        let y_pred: Vec<f64> = y_prev.iter().zip(&tau).map(|(y, t)| y + ds * t).collect();
        let attempt = tracer.state_from(&state, &y_pred).and_then(|guess| {
            let constraint = Constraint::Arclength { prev: y_prev.clone(), tangent: tau.clone(), ds };
            let rep = newton_correct(&guess, &constraint, &tracer.op, metric, &opts.newton)?;
            let sup = tracer.fine.residual(&rep.state)?.sup_norm;
            if sup >= opts.refined_tol {
                return Err(VStateError::NewtonFailure { iterations: rep.iterations, residual: sup });
            }
            Ok((rep, sup))
        });
        let (rep, sup) = match attempt {
            Ok(ok) => ok,
            Err(e) => {
                let geometry = matches!(e, VStateError::Geometry(_) | VStateError::InvalidState(_));
                ds *= 0.5;
                easy = 0;
                if ds < opts.ds_min {
                    branch.termination =
                        if geometry { Termination::GuardViolated } else { Termination::Stalled };
                    return Ok(branch);
                }
                continue;
            }
        };

        let y_new = metric.scaled(&rep.state);
        let step = Metric::distance(&y_new, &y_prev);
        tau = y_new.iter().zip(&y_prev).map(|(a, b)| (a - b) / step).collect();
        arclength += step;

        let (t_prev, t_new) = (state.inner.coeffs()[0], rep.state.inner.coeffs()[0]);
        if t_prev * t_new < 0.0 || (t_new.abs() < opts.t_tol && t_prev.abs() >= opts.t_tol) {
            if let Ok(l) = tracer.refine_hit(&state, &rep.state) {
                branch.trivial_hits.push(l);
            }
        }
        branch.points.push(BranchPoint::from_state(&rep.state, sup, arclength));
        state = rep.state;

        if arclength > 10.0 * opts.ds0 && Metric::distance(&y_new, &y_first) < 3.0 * ds {
            branch.closed = true;
            branch.termination = Termination::Closed;
            return Ok(branch);
        }
        if arclength > opts.max_arclength {
            branch.termination = Termination::ArclengthBudget;
            return Ok(branch);
        }
        if rep.iterations <= 3 {
            easy += 1;
            if easy >= 3 {
                ds = (ds * 1.3).min(opts.ds_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
    }
    branch.termination = Termination::MaxSteps;
    Ok(branch)
}

/// Bracket of the smallest `b` for which the traced branch closes within
/// the given budget, found by bisection between a failing `b_low` and a
/// closing `b_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub b_low: f64,
    pub b_high: f64,
    pub max_steps: usize,
    pub max_arclength: f64,
}

pub fn estimate_loop_threshold(
    m: usize,
    sign: Sign,
    mut b_low: f64,
    mut b_high: f64,
    bisections: usize,
    modes: usize,
    opts: &TraceOptions,
) -> Result<ThresholdEstimate> {
    let grid = SpectralGrid::new(modes, m)?;
    let closes = |b: f64| -> bool { trace_loop(m, b, sign, &grid, opts).map(|br| br.closed).unwrap_or(false) };
    if closes(b_low) || !closes(b_high) {
        return Err(VStateError::Domain(format!("[{b_low}, {b_high}] does not bracket the closure threshold")));
    }
    for _ in 0..bisections {
        let mid = 0.5 * (b_low + b_high);
        if closes(mid) {
            b_high = mid;
        } else {
            b_low = mid;
        }
    }
    Ok(ThresholdEstimate { b_low, b_high, max_steps: opts.max_steps, max_arclength: opts.max_arclength })
}
