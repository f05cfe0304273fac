//! Step timing and support-foot bookkeeping over the preview horizon.
//!
//! A step cycle owns `cycle_ticks` intervals. Its first `double_support_ticks`
//! intervals are the double support that follows touchdown of the incoming
//! foot, the rest are single support on that same foot. Assigning double
//! support to the incoming foot keeps every ZMP constraint a box around a
//! single foot.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lipm::GaitParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Direction of the lateral axis this foot sits on relative to the other.
    pub fn lateral_sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootPose {
    pub x: f64,
    pub y: f64,
    pub side: Side,
}

impl FootPose {
    pub fn new(x: f64, y: f64, side: Side) -> Self {
        Self { x, y, side }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    SingleSupport,
    DoubleSupport,
}

impl Phase {
    pub fn code(self) -> &'static str {
        match self {
            Phase::SingleSupport => "SS",
            Phase::DoubleSupport => "DS",
        }
    }
}

/// Ownership of one horizon interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalSupport {
    /// 0 is the current stance foot, `j >= 1` the j-th future footstep.
    pub step_index: usize,
    pub phase: Phase,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportTimeline {
    pub intervals: Vec<IntervalSupport>,
    /// Number of future footsteps `m` that own at least one interval.
    pub future_steps: usize,
}

impl SupportTimeline {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn step_indices(&self) -> Vec<usize> {
        self.intervals.iter().map(|s| s.step_index).collect()
    }
}

/// Labels the horizon starting `phase_clock` seconds into the current step cycle.
pub fn build_timeline(phase_clock: f64, current_support: &FootPose, params: &GaitParams) -> Result<SupportTimeline> {
    let cycle = params.step_duration();
    if !phase_clock.is_finite() || phase_clock < 0.0 || phase_clock >= cycle {
        return Err(invalid(
            "phase_clock",
            format!("must lie in [0, {cycle}), got {phase_clock}"),
        ));
    }
    let tick = (phase_clock / params.interval + 1e-9).floor() as usize;
    build_timeline_at_tick(tick, current_support, params)
}

/// Same as [`build_timeline`] with the phase given as a whole interval count.
pub fn build_timeline_at_tick(
    phase_tick: usize,
    current_support: &FootPose,
    params: &GaitParams,
) -> Result<SupportTimeline> {
    let cycle = params.cycle_ticks();
    let ds = params.double_support_ticks();
    if phase_tick >= cycle {
        return Err(invalid(
            "phase_clock",
            format!("must be below {cycle} intervals, got {phase_tick}"),
        ));
    }
    let intervals: Vec<_> = (0..params.horizon)
        .map(|i| {
            let t = phase_tick + i;
            let step_index = t / cycle;
            let phase = if t % cycle < ds {
                Phase::DoubleSupport
            } else {
                Phase::SingleSupport
            };
            let side = if step_index.is_multiple_of(2) {
                current_support.side
            } else {
                current_support.side.opposite()
            };
            IntervalSupport {
                step_index,
                phase,
                side,
            }
        })
        .collect();
    let future_steps = intervals.last().map_or(0, |s| s.step_index);
    if future_steps > params.max_future_steps {
        return Err(invalid(
            "horizon",
            format!(
                "spans {future_steps} future steps, more than max_future_steps = {}",
                params.max_future_steps
            ),
        ));
    }
    Ok(SupportTimeline {
        intervals,
        future_steps,
    })
}

/// Indicator matrices mapping footsteps onto horizon intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrices {
    /// `U_c`, N-vector.
    pub current: DVector<f64>,
    /// `U`, N×m.
    pub future: DMatrix<f64>,
}

impl SelectionMatrices {
    pub fn future_steps(&self) -> usize {
        self.future.ncols()
    }

    /// Reference ZMP along one axis: `U_c f_c + U F`.
    pub fn reference(&self, current: f64, future: &DVector<f64>) -> DVector<f64> {
        &self.current * current + &self.future * future
    }
}

pub fn build_selection_matrices(timeline: &SupportTimeline) -> SelectionMatrices {
    let n = timeline.len();
    let m = timeline.future_steps;
    let mut current = DVector::zeros(n);
    let mut future = DMatrix::zeros(n, m);
    for (i, s) in timeline.intervals.iter().enumerate() {
        match s.step_index {
            0 => current[i] = 1.0,
            j => future[(i, j - 1)] = 1.0,
        }
    }
    SelectionMatrices { current, future }
}

/// Which foot a constraint box is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxCenter {
    /// The fixed current stance foot.
    CurrentFoot,
    /// The decision variable of future footstep `j` (0-based column).
    FutureStep(usize),
}

/// Axis-aligned box `|p - (c + offset)| <= half` around a reference foot `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintBox {
    pub center_ref: BoxCenter,
    pub offset_x: f64,
    pub offset_y: f64,
    pub half_x: f64,
    pub half_y: f64,
}

impl ConstraintBox {
    pub fn contains(&self, reference: (f64, f64), point: (f64, f64)) -> bool {
        (point.0 - reference.0 - self.offset_x).abs() <= self.half_x
            && (point.1 - reference.1 - self.offset_y).abs() <= self.half_y
    }

    pub fn x_range(&self, reference: f64) -> (f64, f64) {
        let c = reference + self.offset_x;
        (c - self.half_x, c + self.half_x)
    }

    pub fn y_range(&self, reference: f64) -> (f64, f64) {
        let c = reference + self.offset_y;
        (c - self.half_y, c + self.half_y)
    }
}

/// Reachability boxes for `count` future footsteps, each relative to the one before.
pub fn footstep_bounds(prev_foot: &FootPose, count: usize, params: &GaitParams) -> Vec<ConstraintBox> {
    let mid = 0.5 * (params.max_step_width + params.min_step_width);
    let half_y = 0.5 * (params.max_step_width - params.min_step_width);
    let mut side = prev_foot.side;
    (0..count)
        .map(|j| {
            side = side.opposite();
            ConstraintBox {
                center_ref: if j == 0 {
                    BoxCenter::CurrentFoot
                } else {
                    BoxCenter::FutureStep(j - 1)
                },
                offset_x: 0.0,
                offset_y: side.lateral_sign() * mid,
                half_x: params.max_step_length,
                half_y,
            }
        })
        .collect()
}

/// Support rectangle of the owning foot for every horizon interval.
pub fn zmp_bounds(timeline: &SupportTimeline, params: &GaitParams) -> Vec<ConstraintBox> {
    timeline
        .intervals
        .iter()
        .map(|s| ConstraintBox {
            center_ref: match s.step_index {
                0 => BoxCenter::CurrentFoot,
                j => BoxCenter::FutureStep(j - 1),
            },
            offset_x: 0.0,
            offset_y: 0.0,
            half_x: 0.5 * params.foot_length,
            half_y: 0.5 * params.foot_width,
        })
        .collect()
}

/// Nominal placement of `count` future footsteps: `advance` forward per step
/// and `width` apart laterally, alternating sides from `stance`.
pub fn nominal_footsteps(stance: &FootPose, count: usize, advance: f64, width: f64) -> Vec<[f64; 2]> {
    let mut side = stance.side;
    let (mut x, mut y) = (stance.x, stance.y);
    (0..count)
        .map(|_| {
            side = side.opposite();
            x += advance;
            y += side.lateral_sign() * width;
            [x, y]
        })
        .collect()
}
