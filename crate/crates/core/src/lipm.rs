//! Linear inverted pendulum dynamics.
//!
//! Each horizontal axis of the centre of mass is a triple integrator driven
//! by piecewise-constant jerk. Over a preview of `N` intervals the sampled
//! positions, velocities and ZMPs are affine in the current state and the
//! stacked jerks:
//!
//! ```text
//!     X = P_ps x̂ + P_pu J
//!     Ẋ = P_vs x̂ + P_vu J
//!     Z = P_zs x̂ + P_zu J
//! ```
//!
//! and the ZMP of a single state is `z = x - (h/g) ẍ`.

use nalgebra::{DMatrix, DVector, Matrix1x3, RowVector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical and timing constants of the walking model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitParams {
    /// Sampling interval `T` (s).
    pub interval: f64,
    /// Pendulum (CoM) height `h` (m).
    pub com_height: f64,
    /// Gravity `g` (m/s²).
    pub gravity: f64,
    /// Single support duration (s).
    pub single_support: f64,
    /// Double support duration (s).
    pub double_support: f64,
    /// Foot length `a` (m), sagittal extent of the support rectangle.
    pub foot_length: f64,
    /// Foot width `b` (m), lateral extent of the support rectangle.
    pub foot_width: f64,
    /// Maximum sagittal distance between consecutive footsteps (m).
    pub max_step_length: f64,
    /// Maximum lateral distance between consecutive footsteps (m).
    pub max_step_width: f64,
    /// Minimum lateral distance between consecutive footsteps (m).
    pub min_step_width: f64,
    /// Number of preview intervals `N`.
    pub horizon: usize,
    /// Upper bound on the number of future footsteps `m` inside the preview.
    pub max_future_steps: usize,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            interval: 0.1,
            com_height: 0.8,
            gravity: 9.81,
            single_support: 0.5,
            double_support: 0.1,
            foot_length: 0.2,
            foot_width: 0.1,
            max_step_length: 0.6,
            max_step_width: 0.4,
            min_step_width: 0.1,
            horizon: 12,
            max_future_steps: 2,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(name, format!("must be finite, got {value}")));
    }
    if value <= 0.0 {
        return Err(invalid(name, format!("must be positive, got {value}")));
    }
    Ok(())
}

fn whole_intervals(name: &'static str, duration: f64, interval: f64) -> Result<usize> {
    let ratio = duration / interval;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(invalid(
            name,
            format!("must be a whole multiple of the interval {interval}, got {duration}"),
        ));
    }
    Ok(rounded as usize)
}

impl GaitParams {
    /// Checks every invariant of the parameter set.
    pub fn validate(&self) -> Result<()> {
        positive("interval", self.interval)?;
        positive("com_height", self.com_height)?;
        positive("gravity", self.gravity)?;
        positive("single_support", self.single_support)?;
        positive("double_support", self.double_support)?;
        positive("foot_length", self.foot_length)?;
        positive("foot_width", self.foot_width)?;
        positive("max_step_length", self.max_step_length)?;
        positive("max_step_width", self.max_step_width)?;
        positive("min_step_width", self.min_step_width)?;
        if self.min_step_width >= self.max_step_width {
            return Err(invalid(
                "min_step_width",
                format!(
                    "must be below max_step_width ({} >= {})",
                    self.min_step_width, self.max_step_width
                ),
            ));
        }
        whole_intervals("single_support", self.single_support, self.interval)?;
        whole_intervals("double_support", self.double_support, self.interval)?;
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least one interval"));
        }
        if self.max_future_steps == 0 {
            return Err(invalid("max_future_steps", "must be at least one"));
        }
        Ok(())
    }

    /// `h / g`, the ZMP lever arm on the CoM acceleration.
    pub fn zmp_lever(&self) -> f64 {
        self.com_height / self.gravity
    }

    pub fn step_duration(&self) -> f64 {
        self.single_support + self.double_support
    }

    /// Intervals per step cycle (single plus double support).
    pub fn cycle_ticks(&self) -> usize {
        self.single_support_ticks() + self.double_support_ticks()
    }

    pub fn single_support_ticks(&self) -> usize {
        (self.single_support / self.interval).round() as usize
    }

    pub fn double_support_ticks(&self) -> usize {
        (self.double_support / self.interval).round() as usize
    }

    /// Returns a copy whose horizon covers exactly `steps` step cycles.
    pub fn with_step_horizon(mut self, steps: usize) -> Self {
        self.horizon = steps * self.cycle_ticks();
        self.max_future_steps = steps;
        self
    }
}

/// Position, velocity and acceleration of the CoM along one axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisState {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl AxisState {
    pub fn new(position: f64, velocity: f64, acceleration: f64) -> Self {
        Self {
            position,
            velocity,
            acceleration,
        }
    }

    pub fn at_rest(position: f64) -> Self {
        Self::new(position, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.acceleration.is_finite()
    }

    pub fn as_vector(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(self.position, self.velocity, self.acceleration)
    }
}

/// Advances one axis by one interval of constant jerk, exactly.
pub fn propagate(state: AxisState, jerk: f64, interval: f64) -> Result<AxisState> {
    if !state.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if !jerk.is_finite() {
        return Err(Error::NonFinite("jerk"));
    }
    if !interval.is_finite() {
        return Err(Error::NonFinite("interval"));
    }
    let t = interval;
    let AxisState {
        position: p,
        velocity: v,
        acceleration: a,
    } = state;
    Ok(AxisState {
        position: p + v * t + a * t * t / 2.0 + jerk * t * t * t / 6.0,
        velocity: v + a * t + jerk * t * t / 2.0,
        acceleration: a + jerk * t,
    })
}

/// ZMP of a CoM state under the LIPM: `x - (h/g) ẍ`.
pub fn zmp_of(state: AxisState, params: &GaitParams) -> f64 {
    state.position - params.zmp_lever() * state.acceleration
}

/// Signed required coefficient of friction along one axis, `(c - z) / h`.
pub fn rcof_of(com_position: f64, zmp_position: f64, params: &GaitParams) -> f64 {
    (com_position - zmp_position) / params.com_height
}

/// Stacked integration operators over the preview horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonMatrices {
    /// `P_ps`, N×3.
    pub pos_state: DMatrix<f64>,
    /// `P_vs`, N×3.
    pub vel_state: DMatrix<f64>,
    /// `P_zs`, N×3.
    pub zmp_state: DMatrix<f64>,
    /// `P_pu`, N×N lower triangular.
    pub pos_jerk: DMatrix<f64>,
    /// `P_vu`, N×N lower triangular.
    pub vel_jerk: DMatrix<f64>,
    /// `P_zu`, N×N lower triangular.
    pub zmp_jerk: DMatrix<f64>,
}

/// Builds the horizon operators from their closed forms.
pub fn build_horizon_matrices(params: &GaitParams) -> Result<HorizonMatrices> {
    let n = params.horizon;
    if n == 0 {
        return Err(invalid("horizon", "must be at least one interval"));
    }
    let t = params.interval;
    let lever = params.zmp_lever();
    if !t.is_finite() || !lever.is_finite() {
        return Err(Error::NonFinite("params"));
    }
    positive("interval", t)?;
    positive("com_height", params.com_height)?;
    positive("gravity", params.gravity)?;

    let mut pos_state = DMatrix::zeros(n, 3);
    let mut vel_state = DMatrix::zeros(n, 3);
    let mut zmp_state = DMatrix::zeros(n, 3);
    for row in 0..n {
        let elapsed = (row + 1) as f64 * t;
        let pos = RowVector3::new(1.0, elapsed, elapsed * elapsed / 2.0);
        pos_state.set_row(row, &pos);
        vel_state.set_row(row, &RowVector3::new(0.0, 1.0, elapsed));
        zmp_state.set_row(row, &(pos - Matrix1x3::new(0.0, 0.0, lever)));
    }

    let mut pos_jerk = DMatrix::zeros(n, n);
    let mut vel_jerk = DMatrix::zeros(n, n);
    let mut zmp_jerk = DMatrix::zeros(n, n);
    for row in 0..n {
        for col in 0..=row {
            let d = (row - col) as f64;
            let p = (1.0 + 3.0 * d + 3.0 * d * d) * t * t * t / 6.0;
            pos_jerk[(row, col)] = p;
            vel_jerk[(row, col)] = (1.0 + 2.0 * d) * t * t / 2.0;
            zmp_jerk[(row, col)] = p - lever * t;
        }
    }

    Ok(HorizonMatrices {
        pos_state,
        vel_state,
        zmp_state,
        pos_jerk,
        vel_jerk,
        zmp_jerk,
    })
}

/// Predicted samples of one axis over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisPrediction {
    pub positions: DVector<f64>,
    pub velocities: DVector<f64>,
    pub zmps: DVector<f64>,
}

impl HorizonMatrices {
    pub fn horizon(&self) -> usize {
        self.pos_jerk.nrows()
    }

    /// `P_ps - P_zs`: the state map of the CoM-to-ZMP offset.
    pub fn offset_state(&self) -> DMatrix<f64> {
        &self.pos_state - &self.zmp_state
    }

    /// `P_pu - P_zu`: the jerk map of the CoM-to-ZMP offset.
    pub fn offset_jerk(&self) -> DMatrix<f64> {
        &self.pos_jerk - &self.zmp_jerk
    }

    pub fn predict(&self, state: AxisState, jerks: &DVector<f64>) -> AxisPrediction {
        let s = state.as_vector();
        AxisPrediction {
            positions: &self.pos_state * s + &self.pos_jerk * jerks,
            velocities: &self.vel_state * s + &self.vel_jerk * jerks,
            zmps: &self.zmp_state * s + &self.zmp_jerk * jerks,
        }
    }

    /// Stacked signed RCoF, `((P_ps - P_zs) x̂ + (P_pu - P_zu) J) / h`.
    pub fn predict_rcof(&self, state: AxisState, jerks: &DVector<f64>, height: f64) -> DVector<f64> {
        (self.offset_state() * state.as_vector() + self.offset_jerk() * jerks) / height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(n: usize) -> GaitParams {
        GaitParams {
            horizon: n,
            ..GaitParams::default()
        }
    }

    /// Forward Euler on the triple integrator with a fine step.
    fn euler(state: AxisState, jerk: f64, duration: f64, dt: f64) -> AxisState {
        let steps = (duration / dt).round() as usize;
        let (mut p, mut v, mut a) = (state.position, state.velocity, state.acceleration);
        for _ in 0..steps {
            p += v * dt + 0.5 * a * dt * dt;
            v += a * dt;
            a += jerk * dt;
        }
        AxisState::new(p, v, a)
    }

    #[test]
    fn default_params_are_valid() {
        let p = GaitParams::default();
        p.validate().unwrap();
        assert_eq!(p.cycle_ticks(), 6);
        assert_eq!(p.horizon, 2 * p.cycle_ticks());
        assert_eq!(p.with_step_horizon(2), p);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = GaitParams {
            min_step_width: 0.5,
            ..GaitParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter {
                name: "min_step_width",
                ..
            })
        ));
        let bad = GaitParams {
            double_support: 0.15,
            ..GaitParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaitParams {
            com_height: f64::NAN,
            ..GaitParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(build_horizon_matrices(&bad).is_err());
        assert!(build_horizon_matrices(&single(0)).is_err());
    }

    #[test]
    fn single_interval_matrices() {
        let m = build_horizon_matrices(&single(1)).unwrap();
        assert_relative_eq!(m.vel_jerk[(0, 0)], 0.005, epsilon = 1e-15);
        assert_relative_eq!(m.pos_jerk[(0, 0)], 1.0e-3 / 6.0, epsilon = 1e-15);
        // one step of the recursion, then z = x - (h/g) a
        let s = propagate(AxisState::default(), 1.0, 0.1).unwrap();
        let oracle = s.position - 0.8 / 9.81 * s.acceleration;
        assert_relative_eq!(m.zmp_jerk[(0, 0)], oracle, epsilon = 1e-15);
        // the published figure is rounded by hand and is off in its last digit
        assert_relative_eq!(m.zmp_jerk[(0, 0)], -7.9881e-3, epsilon = 5e-7);
    }

    #[test]
    fn state_columns_match_recursion() {
        let params = single(12);
        let m = build_horizon_matrices(&params).unwrap();
        for row in 0..12 {
            let i = (row + 1) as f64;
            assert_relative_eq!(m.pos_state[(row, 1)], i * 0.1, epsilon = 1e-12);
            assert_relative_eq!(m.pos_state[(row, 2)], i * i * 0.01 / 2.0, epsilon = 1e-12);
        }
        // each basis state, rolled forward with zero jerk, gives one column
        for col in 0..3 {
            let mut s = AxisState::default();
            match col {
                0 => s.position = 1.0,
                1 => s.velocity = 1.0,
                _ => s.acceleration = 1.0,
            }
            for row in 0..12 {
                s = propagate(s, 0.0, 0.1).unwrap();
                assert!((m.pos_state[(row, col)] - s.position).abs() < 1e-12);
                assert!((m.vel_state[(row, col)] - s.velocity).abs() < 1e-12);
                assert!((m.zmp_state[(row, col)] - zmp_of(s, &params)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jerk_matrices_are_lower_triangular() {
        let m = build_horizon_matrices(&single(8)).unwrap();
        for r in 0..8 {
            assert!(m.pos_jerk[(r, r)] > 0.0);
            assert!(m.vel_jerk[(r, r)] > 0.0);
            for c in r + 1..8 {
                assert_eq!(m.pos_jerk[(r, c)], 0.0);
                assert_eq!(m.vel_jerk[(r, c)], 0.0);
                assert_eq!(m.zmp_jerk[(r, c)], 0.0);
            }
        }
    }

    #[test]
    fn propagate_examples() {
        assert_eq!(propagate(AxisState::default(), 0.0, 0.1).unwrap(), AxisState::default());
        let s = propagate(AxisState::default(), 6.0, 1.0).unwrap();
        assert_eq!(s, AxisState::new(1.0, 3.0, 6.0));

        let start = AxisState::new(1.0, 0.5, -0.2);
        let oracle = euler(start, 0.3, 0.1, 1e-6);
        assert!((oracle.position - 1.04905).abs() < 1e-6);
        assert!((oracle.velocity - 0.4815).abs() < 1e-6);
        assert!((oracle.acceleration + 0.17).abs() < 1e-6);
        let s = propagate(start, 0.3, 0.1).unwrap();
        assert_relative_eq!(s.position, 1.04905, epsilon = 1e-12);
        assert_relative_eq!(s.velocity, 0.4815, epsilon = 1e-12);
        assert_relative_eq!(s.acceleration, -0.17, epsilon = 1e-12);

        assert!(propagate(AxisState::new(f64::NAN, 0.0, 0.0), 0.0, 0.1).is_err());
        assert!(propagate(AxisState::default(), f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn zmp_and_rcof_examples() {
        let p = GaitParams::default();
        assert_eq!(zmp_of(AxisState::new(0.1, 3.0, 0.0), &p), 0.1);
        assert_relative_eq!(
            zmp_of(AxisState::new(0.1, 0.0, 1.0), &p),
            0.1 - 0.8 / 9.81,
            epsilon = 1e-15
        );
        assert!((zmp_of(AxisState::new(0.1, 0.0, 1.0), &p) - 0.018450).abs() < 1e-6);
        assert!((zmp_of(AxisState::new(0.0, 0.0, -0.5), &p) - 0.040775).abs() < 1e-6);

        assert_eq!(rcof_of(0.3, 0.3, &p), 0.0);
        assert_relative_eq!(rcof_of(0.08, 0.0, &p), 0.1, epsilon = 1e-15);
        assert_relative_eq!(rcof_of(0.0, 0.28, &p), -0.35, epsilon = 1e-15);
    }
}
