//! Brute-force reference implementations for the test suites.
//!
//! Nothing here shares a code path with the production routines it checks:
//! predictions are rolled out one interval at a time with [`propagate`], and
//! QPs are solved by enumerating active sets.

use nalgebra::{DMatrix, DVector};

use crate::condense::{Axis, CostWeights, FrictionProfile, Preview, QpProblem};
use crate::gait::{BoxCenter, ConstraintBox};
use crate::lipm::{propagate, rcof_of, zmp_of, AxisState};

/// Sampled states after each interval of the given jerk sequence.
pub fn roll_out(start: AxisState, jerks: &[f64], interval: f64) -> Vec<AxisState> {
    let mut s = start;
    jerks
        .iter()
        .map(|&j| {
            s = propagate(s, j, interval).expect("finite rollout");
            s
        })
        .collect()
}

fn axis_rollout(preview: &Preview<'_>, u: &DVector<f64>, axis: Axis) -> (Vec<AxisState>, Vec<f64>) {
    let lay = preview.layout();
    let jerks: Vec<f64> = lay.jerks(u, axis).iter().copied().collect();
    let steps: Vec<f64> = lay.steps_of(u, axis).iter().copied().collect();
    (roll_out(preview.state(axis), &jerks, preview.params.interval), steps)
}

fn foot_ref(preview: &Preview<'_>, steps: &[f64], axis: Axis, center: BoxCenter) -> f64 {
    match center {
        BoxCenter::CurrentFoot => preview.foot(axis),
        BoxCenter::FutureStep(j) => steps[j],
    }
}

/// The friction-aware cost evaluated on an explicit rollout, including
/// the jerk and footstep regularizers. The RCoF term is weighted by `δ h²`
/// so that it matches the convention with `1/h²` folded into `δ`.
pub fn rollout_cost(
    preview: &Preview<'_>,
    vel_ref: &[[f64; 2]],
    nominal_steps: &[[f64; 2]],
    weights: &CostWeights,
    u: &DVector<f64>,
) -> f64 {
    let lay = preview.layout();
    let sel = preview.selection;
    let h = preview.params.com_height;
    let mut cost = 0.0;
    for (k, axis) in Axis::BOTH.into_iter().enumerate() {
        let (states, steps) = axis_rollout(preview, u, axis);
        for (i, s) in states.iter().enumerate() {
            let jerk = lay.jerks(u, axis)[i];
            let mut zmp_ref = sel.current[i] * preview.foot(axis);
            for (j, f) in steps.iter().enumerate() {
                zmp_ref += sel.future[(i, j)] * f;
            }
            let z = zmp_of(*s, preview.params);
            let mu = rcof_of(s.position, z, preview.params);
            cost += 0.5 * weights.alpha_jerk * jerk * jerk;
            cost += 0.5 * weights.beta * (s.velocity - vel_ref[i][k]).powi(2);
            cost += 0.5 * weights.gamma * (z - zmp_ref).powi(2);
            cost += 0.5 * weights.delta * h * h * mu * mu;
        }
        for (f, nom) in steps.iter().zip(nominal_steps) {
            cost += 0.5 * weights.epsilon_foot * (f - nom[k]).powi(2);
        }
    }
    cost
}

/// Membership of the rolled-out trajectory in every box and friction pyramid.
pub fn rollout_feasible(
    preview: &Preview<'_>,
    zmp_boxes: &[ConstraintBox],
    step_boxes: &[ConstraintBox],
    profile: Option<&FrictionProfile>,
    u: &DVector<f64>,
) -> bool {
    let (xs, fx) = axis_rollout(preview, u, Axis::X);
    let (ys, fy) = axis_rollout(preview, u, Axis::Y);
    for (i, b) in zmp_boxes.iter().enumerate() {
        let zx = zmp_of(xs[i], preview.params);
        let zy = zmp_of(ys[i], preview.params);
        let cx = foot_ref(preview, &fx, Axis::X, b.center_ref);
        let cy = foot_ref(preview, &fy, Axis::Y, b.center_ref);
        if !b.contains((cx, cy), (zx, zy)) {
            return false;
        }
    }
    for (j, b) in step_boxes.iter().enumerate() {
        let rx = foot_ref(preview, &fx, Axis::X, b.center_ref);
        let ry = foot_ref(preview, &fy, Axis::Y, b.center_ref);
        if !b.contains((rx, ry), (fx[j], fy[j])) {
            return false;
        }
    }
    if let Some(profile) = profile {
        for i in 0..xs.len() {
            let limit = profile.mu_approx[i];
            let rx = rcof_of(xs[i].position, zmp_of(xs[i], preview.params), preview.params);
            let ry = rcof_of(ys[i].position, zmp_of(ys[i], preview.params), preview.params);
            if rx.abs() > limit || ry.abs() > limit {
                return false;
            }
        }
    }
    true
}

/// Solves a small strictly convex QP by trying every active set in order of
/// increasing size and returning the first KKT point. Returns `None` if no
/// subset yields one (infeasible problem).
///
/// Each candidate set `A` is solved through its Schur complement
/// `(G_A Q⁻¹ G_Aᵀ) λ = -(h_A + G_A Q⁻¹ p)`, `u = -Q⁻¹ (p + G_Aᵀ λ)`.
pub fn enumerate_active_sets(problem: &QpProblem) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = problem.dim();
    let rows = problem.rows();
    let q_inv = problem.hessian.clone().try_inverse()?;
    let free = -(&q_inv * &problem.gradient);
    let qg = &q_inv * problem.lhs.transpose();
    let schur = &problem.lhs * &qg;
    let offset = &problem.rhs - &problem.lhs * &free;
    let ctx = Enumeration {
        problem,
        free,
        qg,
        schur,
        offset,
        tol: 1e-9,
    };
    for size in 0..=n.min(rows) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Some(found) = ctx.kkt_point(&subset) {
                return Some(found);
            }
            if !next_combination(&mut subset, rows) {
                break;
            }
        }
    }
    None
}

fn next_combination(subset: &mut [usize], universe: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < universe - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

struct Enumeration<'a> {
    problem: &'a QpProblem,
    /// Unconstrained minimizer.
    free: DVector<f64>,
    /// `Q⁻¹ Gᵀ`.
    qg: DMatrix<f64>,
    /// `G Q⁻¹ Gᵀ`.
    schur: DMatrix<f64>,
    /// `h - G u_free`.
    offset: DVector<f64>,
    tol: f64,
}

impl Enumeration<'_> {
    fn kkt_point(&self, subset: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        let k = subset.len();
        let lambda = if k == 0 {
            DVector::zeros(0)
        } else {
            let s = DMatrix::from_fn(k, k, |a, b| self.schur[(subset[a], subset[b])]);
            let r = DVector::from_fn(k, |a, _| -self.offset[subset[a]]);
            let lu = s.full_piv_lu();
            if !lu.is_invertible() {
                return None;
            }
            lu.solve(&r)?
        };
        if lambda.iter().any(|&l| l < -self.tol) {
            return None;
        }
        let mut u = self.free.clone();
        for (a, &row) in subset.iter().enumerate() {
            u -= self.qg.column(row) * lambda[a];
        }
        let p = self.problem;
        let gap = &p.lhs * &u - &p.rhs;
        if gap.iter().any(|&g| g > self.tol * (1.0 + p.rhs.amax())) {
            return None;
        }
        let mut duals = DVector::zeros(p.rows());
        for (a, &row) in subset.iter().enumerate() {
            duals[row] = lambda[a].max(0.0);
        }
        Some((u, duals))
    }
}
