//! Condensation of the preview problem into a dense QP.
//!
//! The decision vector stacks, per axis, the `N` CoM jerks followed by the
//! `m` future footstep coordinates:
//!
//! ```text
//!     u = [Jx (N), Fx (m), Jy (N), Fy (m)]
//! ```
//!
//! Cost per axis (the RCoF term carries the `1/h²` factor inside `delta`):
//!
//! ```text
//!     α/2 |J|² + β/2 |Ẋ - Ẋref|² + γ/2 |Z - Zref|² + δ/2 |X - Z|² + ε/2 |F - Fnom|²
//! ```

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::gait::{BoxCenter, ConstraintBox, FootPose, SelectionMatrices};
use crate::lipm::{AxisState, GaitParams, HorizonMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    /// Jerk regularization `α`.
    pub alpha_jerk: f64,
    /// Velocity tracking `β`.
    pub beta: f64,
    /// ZMP centering `γ`.
    pub gamma: f64,
    /// RCoF weight `δ`, with `1/h²` folded in.
    pub delta: f64,
    /// Pull of the footsteps toward their nominal placement.
    pub epsilon_foot: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            alpha_jerk: 1e-6,
            beta: 1.0,
            gamma: 0.0,
            delta: 0.0,
            epsilon_foot: 1e-6,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha_jerk", self.alpha_jerk),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon_foot", self.epsilon_foot),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(invalid(name, format!("must be finite and nonnegative, got {w}")));
            }
        }
        // Without a CoM-derivative term the motion is no longer viable.
        if self.beta <= 0.0 {
            return Err(invalid("beta", "the velocity weight must be positive"));
        }
        Ok(())
    }
}

/// Available and linearized friction coefficients over the horizon.
///
/// An infinite coefficient means the interval carries no friction limit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionProfile {
    pub mu_available: Vec<f64>,
    pub mu_approx: Vec<f64>,
}

impl FrictionProfile {
    /// Inscribed pyramid of the friction cone: `μ_ap = (√2/2) μ_av` per axis.
    pub fn from_available(mu_available: Vec<f64>) -> Result<Self> {
        if let Some(&mu) = mu_available.iter().find(|&&mu| mu.is_nan() || mu <= 0.0) {
            return Err(invalid("mu_available", format!("must be positive, got {mu}")));
        }
        let mu_approx = mu_available
            .iter()
            .map(|&mu| std::f64::consts::FRAC_1_SQRT_2 * mu)
            .collect();
        Ok(Self {
            mu_available,
            mu_approx,
        })
    }

    pub fn uniform(mu_available: f64, len: usize) -> Result<Self> {
        Self::from_available(vec![mu_available; len])
    }

    pub fn len(&self) -> usize {
        self.mu_approx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_approx.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];
}

/// Index map of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub horizon: usize,
    pub steps: usize,
}

impl DecisionLayout {
    pub fn new(horizon: usize, steps: usize) -> Self {
        Self { horizon, steps }
    }

    pub fn dim(&self) -> usize {
        2 * (self.horizon + self.steps)
    }

    fn axis_offset(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 0,
            Axis::Y => self.horizon + self.steps,
        }
    }

    pub fn jerk(&self, axis: Axis, i: usize) -> usize {
        self.axis_offset(axis) + i
    }

    pub fn step(&self, axis: Axis, j: usize) -> usize {
        self.axis_offset(axis) + self.horizon + j
    }

    pub fn jerks<'a>(&self, u: &'a DVector<f64>, axis: Axis) -> DVectorView<'a, f64> {
        u.rows(self.jerk(axis, 0), self.horizon)
    }

    pub fn steps_of<'a>(&self, u: &'a DVector<f64>, axis: Axis) -> DVectorView<'a, f64> {
        u.rows(self.step(axis, 0), self.steps)
    }
}

/// Everything the builders need about the current preview.
#[derive(Debug, Clone, Copy)]
pub struct Preview<'a> {
    pub params: &'a GaitParams,
    pub matrices: &'a HorizonMatrices,
    pub selection: &'a SelectionMatrices,
    pub x_state: AxisState,
    pub y_state: AxisState,
    pub current_foot: FootPose,
}

impl Preview<'_> {
    pub fn layout(&self) -> DecisionLayout {
        DecisionLayout::new(self.matrices.horizon(), self.selection.future_steps())
    }

    pub fn state(&self, axis: Axis) -> AxisState {
        match axis {
            Axis::X => self.x_state,
            Axis::Y => self.y_state,
        }
    }

    pub fn foot(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.current_foot.x,
            Axis::Y => self.current_foot.y,
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.matrices.horizon();
        check_dim("selection rows", n, self.selection.current.len())?;
        check_dim("selection rows", n, self.selection.future.nrows())?;
        if !self.x_state.is_finite() || !self.y_state.is_finite() {
            return Err(Error::NonFinite("CoM state"));
        }
        Ok(())
    }
}

fn coord(p: [f64; 2], axis: Axis) -> f64 {
    match axis {
        Axis::X => p[0],
        Axis::Y => p[1],
    }
}

fn box_offset(b: &ConstraintBox, axis: Axis) -> (f64, f64) {
    match axis {
        Axis::X => (b.offset_x, b.half_x),
        Axis::Y => (b.offset_y, b.half_y),
    }
}

/// Quadratic cost `½ uᵀ Q u + pᵀ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cost {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

/// Assembles the Hessian and gradient of the friction-aware cost.
///
/// `vel_ref` holds the desired (sagittal, lateral) velocity per interval and
/// `nominal_steps` the placement the footstep regularizer pulls toward.
pub fn build_cost(
    preview: &Preview<'_>,
    vel_ref: &[[f64; 2]],
    nominal_steps: &[[f64; 2]],
    weights: &CostWeights,
) -> Result<Cost> {
    preview.check()?;
    let layout = preview.layout();
    let (n, m) = (layout.horizon, layout.steps);
    check_dim("velocity reference", n, vel_ref.len())?;
    check_dim("nominal footsteps", m, nominal_steps.len())?;

    let mats = preview.matrices;
    let sel = preview.selection;
    let offset_jerk = mats.offset_jerk();
    let offset_state = mats.offset_state();
    let CostWeights {
        alpha_jerk: alpha,
        beta,
        gamma,
        delta,
        epsilon_foot: eps,
    } = *weights;

    let jerk_block = DMatrix::<f64>::identity(n, n) * alpha
        + mats.vel_jerk.tr_mul(&mats.vel_jerk) * beta
        + mats.zmp_jerk.tr_mul(&mats.zmp_jerk) * gamma
        + offset_jerk.tr_mul(&offset_jerk) * delta;
    let cross_block = -mats.zmp_jerk.tr_mul(&sel.future) * gamma;
    let step_block = sel.future.tr_mul(&sel.future) * gamma + DMatrix::<f64>::identity(m, m) * eps;

    let dim = layout.dim();
    let mut hessian = DMatrix::zeros(dim, dim);
    let mut gradient = DVector::zeros(dim);
    for axis in Axis::BOTH {
        let j0 = layout.jerk(axis, 0);
        let f0 = layout.step(axis, 0);
        hessian.view_mut((j0, j0), (n, n)).copy_from(&jerk_block);
        hessian.view_mut((j0, f0), (n, m)).copy_from(&cross_block);
        hessian.view_mut((f0, j0), (m, n)).copy_from(&cross_block.transpose());
        hessian.view_mut((f0, f0), (m, m)).copy_from(&step_block);

        let s = preview.state(axis).as_vector();
        let vref = DVector::from_iterator(n, vel_ref.iter().map(|v| coord(*v, axis)));
        let vel_residual = &mats.vel_state * s - vref;
        let zmp_residual = &mats.zmp_state * s - &sel.current * preview.foot(axis);
        let offset = &offset_state * s;
        let g_jerk = mats.vel_jerk.tr_mul(&vel_residual) * beta
            + mats.zmp_jerk.tr_mul(&zmp_residual) * gamma
            + offset_jerk.tr_mul(&offset) * delta;
        let nominal = DVector::from_iterator(m, nominal_steps.iter().map(|p| coord(*p, axis)));
        let g_step = -sel.future.tr_mul(&zmp_residual) * gamma - nominal * eps;
        gradient.rows_mut(j0, n).copy_from(&g_jerk);
        gradient.rows_mut(f0, m).copy_from(&g_step);
    }
    Ok(Cost { hessian, gradient })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowGroup {
    Zmp,
    Friction,
    Footstep,
    /// Rows of problems built by hand rather than by the condenser.
    Custom,
}

/// Provenance of one inequality row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub group: RowGroup,
    pub axis: Axis,
    /// Horizon interval (ZMP, friction) or future step (footstep) index.
    pub index: usize,
    /// `true` for the upper bound of the pair.
    pub upper: bool,
}

impl RowTag {
    pub fn custom(index: usize) -> Self {
        Self {
            group: RowGroup::Custom,
            axis: Axis::X,
            index,
            upper: true,
        }
    }
}

/// A block of rows `G u <= h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGroup {
    pub lhs: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub tags: Vec<RowTag>,
}

impl ConstraintGroup {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }
}

struct GroupBuilder {
    dim: usize,
    coeffs: Vec<f64>,
    rhs: Vec<f64>,
    tags: Vec<RowTag>,
}

impl GroupBuilder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            coeffs: Vec::new(),
            rhs: Vec::new(),
            tags: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>, rhs: f64, tag: RowTag) {
        debug_assert_eq!(row.len(), self.dim);
        self.coeffs.extend(row);
        self.rhs.push(rhs);
        self.tags.push(tag);
    }

    fn finish(self) -> ConstraintGroup {
        let rows = self.rhs.len();
        ConstraintGroup {
            lhs: DMatrix::from_row_slice(rows, self.dim, &self.coeffs),
            rhs: DVector::from_vec(self.rhs),
            tags: self.tags,
        }
    }
}

/// Pyramid friction rows: `±(P_pu - P_zu) J <= μ_ap h ∓ (P_ps - P_zs) x̂` per axis.
///
/// Intervals with an infinite coefficient emit no rows.
pub fn build_friction_constraints(preview: &Preview<'_>, profile: &FrictionProfile) -> Result<ConstraintGroup> {
    preview.check()?;
    let layout = preview.layout();
    let n = layout.horizon;
    check_dim("friction profile", n, profile.len())?;
    let offset_jerk = preview.matrices.offset_jerk();
    let offset_state = preview.matrices.offset_state();
    let h = preview.params.com_height;

    let mut out = GroupBuilder::new(layout.dim());
    for upper in [true, false] {
        let sign = if upper { 1.0 } else { -1.0 };
        for axis in Axis::BOTH {
            let free = offset_state.clone() * preview.state(axis).as_vector();
            for i in 0..n {
                let mu = profile.mu_approx[i];
                if mu.is_infinite() {
                    continue;
                }
                let mut row = vec![0.0; layout.dim()];
                for k in 0..=i {
                    row[layout.jerk(axis, k)] = sign * offset_jerk[(i, k)];
                }
                out.push(
                    row,
                    mu * h - sign * free[i],
                    RowTag {
                        group: RowGroup::Friction,
                        axis,
                        index: i,
                        upper,
                    },
                );
            }
        }
    }
    Ok(out.finish())
}

/// ZMP-in-support-rectangle rows, one upper/lower pair per interval and axis.
pub fn build_zmp_constraints(preview: &Preview<'_>, boxes: &[ConstraintBox]) -> Result<ConstraintGroup> {
    preview.check()?;
    let layout = preview.layout();
    let n = layout.horizon;
    check_dim("ZMP boxes", n, boxes.len())?;
    let mats = preview.matrices;

    let mut out = GroupBuilder::new(layout.dim());
    for axis in Axis::BOTH {
        let free = &mats.zmp_state * preview.state(axis).as_vector();
        for (i, b) in boxes.iter().enumerate() {
            let (offset, half) = box_offset(b, axis);
            let (step_col, foot_const) = match b.center_ref {
                BoxCenter::CurrentFoot => (None, preview.foot(axis)),
                BoxCenter::FutureStep(j) => {
                    if j >= layout.steps {
                        return Err(Error::DimensionMismatch {
                            context: "ZMP box footstep reference",
                            expected: layout.steps,
                            actual: j + 1,
                        });
                    }
                    (Some(layout.step(axis, j)), 0.0)
                }
            };
            let center = foot_const + offset;
            for upper in [true, false] {
                let sign = if upper { 1.0 } else { -1.0 };
                let mut row = vec![0.0; layout.dim()];
                for k in 0..=i {
                    row[layout.jerk(axis, k)] = sign * mats.zmp_jerk[(i, k)];
                }
                if let Some(col) = step_col {
                    row[col] = -sign;
                }
                out.push(
                    row,
                    half + sign * (center - free[i]),
                    RowTag {
                        group: RowGroup::Zmp,
                        axis,
                        index: i,
                        upper,
                    },
                );
            }
        }
    }
    Ok(out.finish())
}

/// Chained footstep reachability rows, one upper/lower pair per step and axis.
pub fn build_footstep_constraints(
    boxes: &[ConstraintBox],
    current_foot: &FootPose,
    layout: DecisionLayout,
) -> Result<ConstraintGroup> {
    check_dim("footstep boxes", layout.steps, boxes.len())?;
    let mut out = GroupBuilder::new(layout.dim());
    for axis in Axis::BOTH {
        let foot = match axis {
            Axis::X => current_foot.x,
            Axis::Y => current_foot.y,
        };
        for (j, b) in boxes.iter().enumerate() {
            let (offset, half) = box_offset(b, axis);
            let (prev_col, ref_const) = match b.center_ref {
                BoxCenter::CurrentFoot => (None, foot),
                BoxCenter::FutureStep(k) if k < j => (Some(layout.step(axis, k)), 0.0),
                BoxCenter::FutureStep(k) => {
                    return Err(invalid(
                        "footstep boxes",
                        format!("step {j} cannot be chained to step {k}"),
                    ))
                }
            };
            for upper in [true, false] {
                let sign = if upper { 1.0 } else { -1.0 };
                let mut row = vec![0.0; layout.dim()];
                row[layout.step(axis, j)] = sign;
                if let Some(col) = prev_col {
                    row[col] = -sign;
                }
                out.push(
                    row,
                    half + sign * (ref_const + offset),
                    RowTag {
                        group: RowGroup::Footstep,
                        axis,
                        index: j,
                        upper,
                    },
                );
            }
        }
    }
    Ok(out.finish())
}

/// Dense convex QP: minimize `½ uᵀ Q u + pᵀ u` subject to `G u <= h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub lhs: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub tags: Vec<RowTag>,
}

impl QpProblem {
    /// Builds a problem from raw data; rows are tagged [`RowGroup::Custom`].
    pub fn new(hessian: DMatrix<f64>, gradient: DVector<f64>, lhs: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let tags = (0..rhs.len()).map(RowTag::custom).collect();
        let problem = Self {
            hessian,
            gradient,
            lhs,
            rhs,
            tags,
        };
        problem.check()?;
        Ok(problem)
    }

    pub fn unconstrained(hessian: DMatrix<f64>, gradient: DVector<f64>) -> Result<Self> {
        let n = gradient.len();
        Self::new(hessian, gradient, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.gradient.dot(u)
    }

    /// Indices of the rows produced by one builder.
    pub fn rows_in(&self, group: RowGroup) -> Vec<usize> {
        (0..self.rows()).filter(|&r| self.tags[r].group == group).collect()
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        check_dim("hessian rows", n, self.hessian.nrows())?;
        check_dim("hessian cols", n, self.hessian.ncols())?;
        check_dim("constraint cols", n, self.lhs.ncols())?;
        check_dim("constraint rows", self.rhs.len(), self.lhs.nrows())?;
        check_dim("row tags", self.rhs.len(), self.tags.len())?;
        if self.lhs.iter().chain(self.rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constraint system"));
        }
        Ok(())
    }
}

/// Stacks the cost and the constraint groups into one problem.
pub fn assemble(cost: Cost, groups: &[ConstraintGroup]) -> Result<QpProblem> {
    let n = cost.gradient.len();
    let rows: usize = groups.iter().map(ConstraintGroup::len).sum();
    let mut lhs = DMatrix::zeros(rows, n);
    let mut rhs = DVector::zeros(rows);
    let mut tags = Vec::with_capacity(rows);
    let mut at = 0;
    for g in groups {
        check_dim("constraint group width", n, g.lhs.ncols())?;
        lhs.view_mut((at, 0), (g.len(), n)).copy_from(&g.lhs);
        rhs.rows_mut(at, g.len()).copy_from(&g.rhs);
        tags.extend_from_slice(&g.tags);
        at += g.len();
    }
    let problem = QpProblem {
        hessian: cost.hessian,
        gradient: cost.gradient,
        lhs,
        rhs,
        tags,
    };
    problem.check()?;
    Ok(problem)
}
