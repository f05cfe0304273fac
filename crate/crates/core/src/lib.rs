//! Friction-aware walking pattern generation on a linear inverted pendulum.
//!
//! The crate condenses a receding-horizon preview of CoM jerks and footstep
//! positions into a dense convex QP, solves it with a dual active-set method
//! and runs the resulting controller in closed loop.

mod error;

pub mod condense;
pub mod gait;
pub mod lipm;
pub mod sim;
pub mod solver;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
#[cfg(test)]
mod properties;

pub use condense::{
    assemble, build_cost, build_footstep_constraints, build_friction_constraints, build_zmp_constraints, Axis,
    ConstraintGroup, Cost, CostWeights, DecisionLayout, FrictionProfile, Preview, QpProblem, RowGroup, RowTag,
};
pub use error::{Error, Result};
pub use gait::{
    build_selection_matrices, build_timeline, build_timeline_at_tick, footstep_bounds, nominal_footsteps, zmp_bounds,
    BoxCenter, ConstraintBox, FootPose, IntervalSupport, Phase, SelectionMatrices, Side, SupportTimeline,
};
pub use lipm::{
    build_horizon_matrices, propagate, rcof_of, zmp_of, AxisPrediction, AxisState, GaitParams, HorizonMatrices,
};
pub use sim::{
    preset, preset_scenarios, run_scenario, step_mpc, summarize, Breakpoint, FrictionCoefficient, FrictionKey,
    FrictionPreview, FrictionSchedule, Metrics, Preset, Sample, ScenarioConfig, ScenarioFailure, SegmentStats,
    SimError, SimState, Simulator, StepStats, TrajectoryLog, WeightName, WeightSweep,
};
pub use solver::{check_kkt, DualActiveSet, KktResiduals, QpSolution, QpSolver, SolveStatus, SolverSettings};
