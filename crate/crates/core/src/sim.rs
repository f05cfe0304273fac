//! Closed-loop receding-horizon simulation.
//!
//! Every interval the preview QP is rebuilt from the measured CoM state,
//! solved, and only the first jerk of each axis is applied to the plant (the
//! same triple integrator the controller predicts with). At the end of each
//! step cycle the first planned footstep becomes the new stance foot.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condense::{
    assemble, build_cost, build_footstep_constraints, build_friction_constraints, build_zmp_constraints, Axis,
    CostWeights, DecisionLayout, FrictionProfile, Preview,
};
use crate::error::{invalid, Error, Result};
use crate::gait::{
    build_selection_matrices, build_timeline_at_tick, footstep_bounds, nominal_footsteps, zmp_bounds, FootPose, Phase,
    Side,
};
use crate::lipm::{build_horizon_matrices, propagate, rcof_of, zmp_of, AxisState, GaitParams, HorizonMatrices};
use crate::solver::{DualActiveSet, QpSolver, SolveStatus, SolverSettings};

/// One breakpoint of a piecewise-constant schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    /// Time (s) or step index at which `value` takes effect.
    pub from: f64,
    pub value: f64,
}

impl Breakpoint {
    pub fn new(from: f64, value: f64) -> Self {
        Self { from, value }
    }
}

fn schedule_at(points: &[Breakpoint], key: f64) -> f64 {
    points
        .iter()
        .take_while(|b| b.from <= key + 1e-9)
        .last()
        .unwrap_or(&points[0])
        .value
}

fn validate_schedule(name: &'static str, points: &[Breakpoint]) -> Result<()> {
    let first = points.first().ok_or_else(|| invalid(name, "must not be empty"))?;
    if first.from > 0.0 {
        return Err(invalid(
            name,
            format!("must start at 0, first breakpoint is {}", first.from),
        ));
    }
    if points.windows(2).any(|w| w[1].from <= w[0].from) {
        return Err(invalid(name, "breakpoints must be strictly increasing"));
    }
    if points.iter().any(|b| !b.from.is_finite() || !b.value.is_finite()) {
        return Err(invalid(name, "breakpoints must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionKey {
    Time,
    Step,
}

/// Which coefficient the friction schedule values denote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionCoefficient {
    /// `μ_av`, the surface friction coefficient.
    Available,
    /// `μ_ap`, the per-axis pyramid bound.
    Pyramid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSchedule {
    pub keyed_by: FrictionKey,
    pub coefficient: FrictionCoefficient,
    pub breakpoints: Vec<Breakpoint>,
}

impl FrictionSchedule {
    pub fn constant_pyramid(mu_ap: f64) -> Self {
        Self {
            keyed_by: FrictionKey::Time,
            coefficient: FrictionCoefficient::Pyramid,
            breakpoints: vec![Breakpoint::new(0.0, mu_ap)],
        }
    }

    /// Surface coefficient `μ_av` at a time or step key.
    pub fn available_at(&self, key: f64) -> f64 {
        let v = schedule_at(&self.breakpoints, key);
        match self.coefficient {
            FrictionCoefficient::Available => v,
            FrictionCoefficient::Pyramid => v * std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionPreview {
    /// The schedule is visible over the whole horizon.
    Known,
    /// The horizon is filled with the coefficient of the current interval.
    CurrentOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: GaitParams,
    pub weights: CostWeights,
    pub solver: SolverSettings,
    /// Simulated time (s); a whole number of intervals.
    pub duration: f64,
    /// Desired sagittal velocity (m/s) keyed by time.
    pub velocity_schedule: Vec<Breakpoint>,
    pub friction_schedule: FrictionSchedule,
    pub friction_preview: FrictionPreview,
    /// Left and right foot at `t = 0`.
    pub initial_feet: [FootPose; 2],
    pub initial_stance: Side,
    /// Seconds already elapsed in the initial stance's step cycle.
    pub initial_phase_clock: f64,
    /// Sagittal and lateral CoM state at `t = 0`.
    pub initial_com: [AxisState; 2],
    /// Lateral separation the footstep regularizer pulls toward (m).
    pub nominal_step_width: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let width = 0.2;
        Self {
            params: GaitParams::default(),
            weights: CostWeights::default(),
            solver: SolverSettings::default(),
            duration: 12.0,
            velocity_schedule: vec![Breakpoint::new(0.0, 0.0)],
            friction_schedule: FrictionSchedule::constant_pyramid(0.5),
            friction_preview: FrictionPreview::Known,
            initial_feet: [
                FootPose::new(0.0, width / 2.0, Side::Left),
                FootPose::new(0.0, -width / 2.0, Side::Right),
            ],
            initial_stance: Side::Left,
            // one interval of support left before the first swing lands
            initial_phase_clock: 0.5,
            initial_com: [AxisState::default(); 2],
            nominal_step_width: width,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.weights.validate()?;
        self.solver.validate()?;
        if self.params.horizon <= self.params.cycle_ticks() {
            return Err(invalid("horizon", "must extend past the end of the current step cycle"));
        }
        let ticks = self.duration / self.params.interval;
        if !(self.duration.is_finite() && self.duration > 0.0) || (ticks - ticks.round()).abs() > 1e-9 * ticks {
            return Err(invalid(
                "duration",
                format!("must be a positive whole number of intervals, got {}", self.duration),
            ));
        }
        validate_schedule("velocity_schedule", &self.velocity_schedule)?;
        validate_schedule("friction_schedule", &self.friction_schedule.breakpoints)?;
        if self.friction_schedule.breakpoints.iter().any(|b| b.value <= 0.0) {
            return Err(invalid("friction_schedule", "coefficients must be positive"));
        }
        if self.initial_feet[0].side == self.initial_feet[1].side {
            return Err(invalid("initial_feet", "must hold one left and one right foot"));
        }
        for foot in &self.initial_feet {
            if !(foot.x.is_finite() && foot.y.is_finite()) {
                return Err(invalid("initial_feet", "coordinates must be finite"));
            }
        }
        let phase = self.initial_phase_clock / self.params.interval;
        if !(phase >= 0.0
            && (phase - phase.round()).abs() < 1e-9
            && (phase.round() as usize) < self.params.cycle_ticks())
        {
            return Err(invalid(
                "initial_phase_clock",
                format!(
                    "must be a whole number of intervals in [0, cycle), got {}",
                    self.initial_phase_clock
                ),
            ));
        }
        if !self.initial_com.iter().all(AxisState::is_finite) {
            return Err(invalid("initial_com", "must be finite"));
        }
        if !(self.nominal_step_width.is_finite() && self.nominal_step_width > 0.0) {
            return Err(invalid("nominal_step_width", "must be positive"));
        }
        Ok(())
    }

    /// Commanded sagittal velocity at time `t`.
    pub fn velocity_at(&self, t: f64) -> f64 {
        schedule_at(&self.velocity_schedule, t)
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.params.interval).round() as usize
    }

    pub fn initial_state(&self) -> SimState {
        let stance = *self
            .initial_feet
            .iter()
            .find(|f| f.side == self.initial_stance)
            .unwrap_or(&self.initial_feet[0]);
        SimState {
            tick: 0,
            time: 0.0,
            com_x: self.initial_com[0],
            com_y: self.initial_com[1],
            stance,
            step: 0,
            phase_tick: (self.initial_phase_clock / self.params.interval).round() as usize,
            prev_solution: None,
        }
    }

    /// CoM at rest midway between the initial feet.
    pub fn com_between_feet(mut self) -> Self {
        let [a, b] = self.initial_feet;
        self.initial_com = [
            AxisState::at_rest(0.5 * (a.x + b.x)),
            AxisState::at_rest(0.5 * (a.y + b.y)),
        ];
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSolution {
    pub u: DVector<f64>,
    pub layout: DecisionLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tick: usize,
    pub time: f64,
    pub com_x: AxisState,
    pub com_y: AxisState,
    pub stance: FootPose,
    /// Global index of the stance foot; the initial stance is step 0.
    pub step: usize,
    /// Whole intervals elapsed in the current step cycle.
    pub phase_tick: usize,
    pub prev_solution: Option<PlannedSolution>,
}

impl SimState {
    pub fn phase_clock(&self, params: &GaitParams) -> f64 {
        self.phase_tick as f64 * params.interval
    }
}

/// State of the plant at the end of one control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub x: AxisState,
    pub y: AxisState,
    pub zmp_x: f64,
    pub zmp_y: f64,
    pub rcof_x: f64,
    pub rcof_y: f64,
    /// Pyramid bound in force over this interval.
    pub mu_ap: f64,
    /// Commanded sagittal velocity over this interval.
    pub v_ref: f64,
    /// Foot owning this interval.
    pub foot: FootPose,
    pub step: usize,
    pub phase: Phase,
    pub jerk: [f64; 2],
    pub solver_status: SolveStatus,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub params: GaitParams,
    pub samples: Vec<Sample>,
    /// Initial stance followed by every committed footstep.
    pub footsteps: Vec<FootPose>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] Error),
    #[error("solver returned {status:?} at tick {tick} (t = {time:.3} s)")]
    Solver {
        tick: usize,
        time: f64,
        status: SolveStatus,
    },
}

/// A run that stopped early, with everything logged up to the failing tick.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct ScenarioFailure {
    pub error: SimError,
    pub log: Box<TrajectoryLog>,
}

impl ScenarioFailure {
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self.error,
            SimError::Solver {
                status: SolveStatus::Infeasible,
                ..
            }
        )
    }
}

/// Receding-horizon controller bound to one scenario.
pub struct Simulator<S = DualActiveSet> {
    config: ScenarioConfig,
    matrices: HorizonMatrices,
    solver: S,
}

impl Simulator<DualActiveSet> {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        Self::with_solver(config, DualActiveSet)
    }
}

impl<S: QpSolver> Simulator<S> {
    pub fn with_solver(config: ScenarioConfig, solver: S) -> Result<Self> {
        config.validate()?;
        let matrices = build_horizon_matrices(&config.params)?;
        Ok(Self {
            config,
            matrices,
            solver,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    fn friction_profile(&self, state: &SimState, steps: &[usize]) -> Result<FrictionProfile> {
        let sched = &self.config.friction_schedule;
        let t = self.config.params.interval;
        let key = |i: usize| match sched.keyed_by {
            FrictionKey::Time => state.time + i as f64 * t,
            FrictionKey::Step => (state.step + steps[i]) as f64,
        };
        let mu: Vec<f64> = match self.config.friction_preview {
            FrictionPreview::Known => (0..steps.len()).map(|i| sched.available_at(key(i))).collect(),
            FrictionPreview::CurrentOnly => vec![sched.available_at(key(0)); steps.len()],
        };
        FrictionProfile::from_available(mu)
    }

    fn warm_start(&self, state: &SimState, layout: DecisionLayout) -> Option<DVector<f64>> {
        let prev = state.prev_solution.as_ref()?;
        let committed = state.phase_tick == 0;
        let mut u = DVector::zeros(layout.dim());
        for axis in Axis::BOTH {
            let jerks = prev.layout.jerks(&prev.u, axis);
            for i in 0..layout.horizon {
                let from = (i + 1).min(prev.layout.horizon - 1);
                u[layout.jerk(axis, i)] = jerks[from];
            }
            let steps = prev.layout.steps_of(&prev.u, axis);
            let skip = usize::from(committed);
            let available = steps.len().saturating_sub(skip);
            for j in 0..layout.steps {
                u[layout.step(axis, j)] = match available {
                    0 => state.stance_coord(axis),
                    _ => steps[skip + j.min(available - 1)],
                };
            }
        }
        Some(u)
    }

    /// Plans over the horizon, applies the first jerks and advances one interval.
    pub fn step(&mut self, state: &SimState) -> std::result::Result<(SimState, Sample), SimError> {
        let cfg = &self.config;
        let params = &cfg.params;
        let timeline = build_timeline_at_tick(state.phase_tick, &state.stance, params)?;
        let selection = build_selection_matrices(&timeline);
        let steps = timeline.future_steps;
        let v_cmd = cfg.velocity_at(state.time);
        let vel_ref = vec![[v_cmd, 0.0]; params.horizon];
        let nominal = nominal_footsteps(
            &state.stance,
            steps,
            v_cmd * params.step_duration(),
            cfg.nominal_step_width,
        );
        let profile = self.friction_profile(state, &timeline.step_indices())?;

        let preview = Preview {
            params,
            matrices: &self.matrices,
            selection: &selection,
            x_state: state.com_x,
            y_state: state.com_y,
            current_foot: state.stance,
        };
        let layout = preview.layout();
        let cost = build_cost(&preview, &vel_ref, &nominal, &cfg.weights)?;
        let zmp = build_zmp_constraints(&preview, &zmp_bounds(&timeline, params))?;
        let friction = build_friction_constraints(&preview, &profile)?;
        let footsteps =
            build_footstep_constraints(&footstep_bounds(&state.stance, steps, params), &state.stance, layout)?;
        let problem = assemble(cost, &[zmp, friction, footsteps])?;

        let warm = self.warm_start(state, layout);
        let solution = self.solver.solve(&problem, &cfg.solver, warm.as_ref())?;
        if solution.status != SolveStatus::Optimal {
            return Err(SimError::Solver {
                tick: state.tick,
                time: state.time,
                status: solution.status,
            });
        }
        let u = solution.u_star;
        let jerk = [u[layout.jerk(Axis::X, 0)], u[layout.jerk(Axis::Y, 0)]];
        let x = propagate(state.com_x, jerk[0], params.interval)?;
        let y = propagate(state.com_y, jerk[1], params.interval)?;
        let zmp_x = zmp_of(x, params);
        let zmp_y = zmp_of(y, params);
        let sample = Sample {
            time: (state.tick + 1) as f64 * params.interval,
            x,
            y,
            zmp_x,
            zmp_y,
            rcof_x: rcof_of(x.position, zmp_x, params),
            rcof_y: rcof_of(y.position, zmp_y, params),
            mu_ap: profile.mu_approx[0],
            v_ref: v_cmd,
            foot: state.stance,
            step: state.step,
            phase: timeline.intervals[0].phase,
            jerk,
            solver_status: solution.status,
            solver_iterations: solution.iterations,
        };

        let mut next = SimState {
            tick: state.tick + 1,
            time: sample.time,
            com_x: x,
            com_y: y,
            stance: state.stance,
            step: state.step,
            phase_tick: state.phase_tick + 1,
            prev_solution: None,
        };
        if next.phase_tick == params.cycle_ticks() {
            next.phase_tick = 0;
            next.step += 1;
            next.stance = FootPose::new(
                u[layout.step(Axis::X, 0)],
                u[layout.step(Axis::Y, 0)],
                state.stance.side.opposite(),
            );
        }
        next.prev_solution = Some(PlannedSolution { u, layout });
        Ok((next, sample))
    }

    pub fn run(&mut self) -> std::result::Result<TrajectoryLog, ScenarioFailure> {
        let mut state = self.config.initial_state();
        let mut log = TrajectoryLog {
            params: self.config.params,
            samples: Vec::with_capacity(self.config.ticks()),
            footsteps: vec![state.stance],
        };
        for _ in 0..self.config.ticks() {
            match self.step(&state) {
                Ok((next, sample)) => {
                    if next.step != state.step {
                        log.footsteps.push(next.stance);
                    }
                    log.samples.push(sample);
                    state = next;
                }
                Err(error) => {
                    return Err(ScenarioFailure {
                        error,
                        log: Box::new(log),
                    })
                }
            }
        }
        Ok(log)
    }
}

impl SimState {
    fn stance_coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.stance.x,
            Axis::Y => self.stance.y,
        }
    }
}

/// One closed-loop tick with a freshly built controller.
pub fn step_mpc(state: &SimState, config: &ScenarioConfig) -> std::result::Result<(SimState, Sample), SimError> {
    Simulator::new(config.clone())?.step(state)
}

pub fn run_scenario(config: &ScenarioConfig) -> std::result::Result<TrajectoryLog, ScenarioFailure> {
    match Simulator::new(config.clone()) {
        Ok(mut sim) => sim.run(),
        Err(e) => Err(ScenarioFailure {
            error: e.into(),
            log: Box::new(TrajectoryLog {
                params: config.params,
                ..TrajectoryLog::default()
            }),
        }),
    }
}

/// A weight grid attached to a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweep {
    pub weight: WeightName,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightName {
    Beta,
    Gamma,
    Delta,
}

impl WeightName {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "beta" => Some(Self::Beta),
            "gamma" => Some(Self::Gamma),
            "delta" => Some(Self::Delta),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Beta => "beta",
            Self::Gamma => "gamma",
            Self::Delta => "delta",
        }
    }

    pub fn apply(self, weights: &mut CostWeights, value: f64) {
        match self {
            Self::Beta => weights.beta = value,
            Self::Gamma => weights.gamma = value,
            Self::Delta => weights.delta = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub config: ScenarioConfig,
    pub sweep: Option<WeightSweep>,
}

fn first_scenario(gamma: f64, delta: f64) -> ScenarioConfig {
    ScenarioConfig {
        weights: CostWeights {
            beta: 1.0,
            gamma,
            delta,
            ..CostWeights::default()
        },
        duration: 12.0,
        velocity_schedule: vec![
            Breakpoint::new(0.0, 0.0),
            Breakpoint::new(2.0, 1.0),
            Breakpoint::new(8.0, 0.0),
        ],
        friction_schedule: FrictionSchedule::constant_pyramid(0.5),
        ..ScenarioConfig::default()
    }
    .com_between_feet()
}

/// Grid of the RCoF-weight study.
pub const DELTA_GRID: [f64; 6] = [0.0, 1.0, 10.0, 50.0, 100.0, 200.0];

/// Built-in scenarios: the weight studies on uniform ground and the
/// surface change known in advance.
pub fn preset_scenarios() -> Vec<Preset> {
    let surface_change = ScenarioConfig {
        weights: CostWeights {
            beta: 1.0,
            gamma: 100.0,
            delta: 1.0,
            ..CostWeights::default()
        },
        duration: 10.2,
        velocity_schedule: vec![Breakpoint::new(0.0, 1.0)],
        friction_schedule: FrictionSchedule {
            keyed_by: FrictionKey::Step,
            coefficient: FrictionCoefficient::Pyramid,
            breakpoints: vec![Breakpoint::new(0.0, 0.4), Breakpoint::new(8.0, 0.16)],
        },
        friction_preview: FrictionPreview::Known,
        ..ScenarioConfig::default()
    }
    .com_between_feet();
    vec![
        Preset {
            name: "s1_beta",
            config: first_scenario(0.0, 0.0),
            sweep: None,
        },
        Preset {
            name: "s1_beta_gamma",
            config: first_scenario(100.0, 0.0),
            sweep: None,
        },
        Preset {
            name: "s1_delta_sweep",
            config: first_scenario(100.0, 0.0),
            sweep: Some(WeightSweep {
                weight: WeightName::Delta,
                grid: DELTA_GRID.to_vec(),
            }),
        },
        Preset {
            name: "s2_surface_change",
            config: surface_change,
            sweep: None,
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    preset_scenarios().into_iter().find(|p| p.name == name)
}

/// Velocity statistics over a run of constant command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub v_ref: f64,
    pub start: f64,
    pub end: f64,
    pub velocity_mean: f64,
    pub velocity_std: f64,
    /// Statistics over the part of the segment past the settling time.
    pub steady_velocity_mean: f64,
    pub steady_velocity_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub mean_velocity: f64,
    /// Whether every tick of the step lies in the steady part of its segment.
    pub steady: bool,
    pub v_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub steady_velocity_mean: f64,
    pub steady_velocity_std: f64,
    /// Largest sagittal RCoF magnitude in the steady window.
    pub max_rcof_steady: f64,
    pub max_rcof_y_steady: f64,
    /// Worst excess over a ZMP box or friction bound across the run (0 if none).
    pub max_constraint_violation: f64,
    pub step_lengths: Vec<f64>,
    pub segments: Vec<SegmentStats>,
    pub steps: Vec<StepStats>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Settling time excluded after every velocity command change.
pub fn settling_time(params: &GaitParams) -> f64 {
    2.0 * params.step_duration()
}

/// Headline numbers of a run. The steady window is the part of the
/// fastest-commanded segment at least [`settling_time`] past its start.
pub fn summarize(log: &TrajectoryLog) -> Metrics {
    let params = &log.params;
    let samples = &log.samples;
    if samples.is_empty() {
        return Metrics::default();
    }
    let t = params.interval;
    let settle = settling_time(params);

    // maximal runs of constant command
    let mut bounds = vec![0];
    for i in 1..samples.len() {
        if samples[i].v_ref != samples[i - 1].v_ref {
            bounds.push(i);
        }
    }
    bounds.push(samples.len());
    let mut steady_flags = vec![false; samples.len()];
    let mut segments = Vec::new();
    for w in bounds.windows(2) {
        let seg = &samples[w[0]..w[1]];
        let start = seg[0].time - t;
        let all: Vec<f64> = seg.iter().map(|s| s.x.velocity).collect();
        let mut steady = Vec::new();
        for (k, s) in seg.iter().enumerate() {
            if s.time - start >= settle - 1e-9 {
                steady_flags[w[0] + k] = true;
                steady.push(s.x.velocity);
            }
        }
        let (velocity_mean, velocity_std) = mean_std(&all);
        let (steady_velocity_mean, steady_velocity_std) = mean_std(&steady);
        segments.push(SegmentStats {
            v_ref: seg[0].v_ref,
            start,
            end: seg[seg.len() - 1].time,
            velocity_mean,
            velocity_std,
            steady_velocity_mean,
            steady_velocity_std,
        });
    }

    let walking = segments.iter().enumerate().fold(0, |best, (k, s)| {
        if s.v_ref.abs() > segments[best].v_ref.abs() {
            k
        } else {
            best
        }
    });
    let (lo, hi) = (bounds[walking], bounds[walking + 1]);
    let steady: Vec<&Sample> = (lo..hi).filter(|&i| steady_flags[i]).map(|i| &samples[i]).collect();
    let max_abs = |f: fn(&Sample) -> f64| steady.iter().map(|s| f(s).abs()).fold(0.0, f64::max);

    let half_x = 0.5 * params.foot_length;
    let half_y = 0.5 * params.foot_width;
    let max_constraint_violation = samples
        .iter()
        .map(|s| {
            [
                (s.zmp_x - s.foot.x).abs() - half_x,
                (s.zmp_y - s.foot.y).abs() - half_y,
                s.rcof_x.abs() - s.mu_ap,
                s.rcof_y.abs() - s.mu_ap,
            ]
            .into_iter()
            .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    let mut steps = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let step = samples[i].step;
        let mut j = i;
        while j < samples.len() && samples[j].step == step {
            j += 1;
        }
        let vels: Vec<f64> = samples[i..j].iter().map(|s| s.x.velocity).collect();
        let complete = j - i == params.cycle_ticks();
        let same_cmd = samples[i..j].iter().all(|s| s.v_ref == samples[i].v_ref);
        steps.push(StepStats {
            step,
            mean_velocity: mean_std(&vels).0,
            steady: complete && same_cmd && steady_flags[i..j].iter().all(|&f| f),
            v_ref: samples[i].v_ref,
        });
        i = j;
    }

    let seg = &segments[walking];
    Metrics {
        steady_velocity_mean: seg.steady_velocity_mean,
        steady_velocity_std: seg.steady_velocity_std,
        max_rcof_steady: max_abs(|s| s.rcof_x),
        max_rcof_y_steady: max_abs(|s| s.rcof_y),
        max_constraint_violation,
        step_lengths: log.footsteps.windows(2).map(|w| w[1].x - w[0].x).collect(),
        segments,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_place() -> ScenarioConfig {
        ScenarioConfig {
            duration: 3.0,
            ..ScenarioConfig::default()
        }
        .com_between_feet()
    }

    #[test]
    fn schedules_are_piecewise_constant() {
        let s = [Breakpoint::new(0.0, 0.0), Breakpoint::new(2.0, 1.0)];
        assert_eq!(schedule_at(&s, 0.0), 0.0);
        assert_eq!(schedule_at(&s, 1.9), 0.0);
        assert_eq!(schedule_at(&s, 2.0), 1.0);
        assert_eq!(schedule_at(&s, 100.0), 1.0);
        let f = FrictionSchedule::constant_pyramid(0.5);
        assert!((f.available_at(3.0) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_validation_names_the_field() {
        let mut c = in_place();
        c.velocity_schedule.clear();
        let err = c.validate().unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                name: "velocity_schedule",
                ..
            }
        ));
        let mut c = in_place();
        c.friction_schedule.breakpoints[0].value = 0.0;
        assert!(c.validate().is_err());
        let mut c = in_place();
        c.duration = 1.05;
        assert!(c.validate().is_err());
        let mut c = in_place();
        c.initial_feet[1].side = Side::Left;
        assert!(c.validate().is_err());
    }

    #[test]
    fn one_tick_matches_one_propagation() {
        let cfg = in_place();
        let state = cfg.initial_state();
        let (next, sample) = step_mpc(&state, &cfg).unwrap();
        let x = propagate(state.com_x, sample.jerk[0], 0.1).unwrap();
        let y = propagate(state.com_y, sample.jerk[1], 0.1).unwrap();
        assert_eq!(next.com_x, x);
        assert_eq!(next.com_y, y);
        assert_eq!(sample.y, y);
        assert_eq!(next.phase_tick, 0);
        assert_eq!(next.step, 1);
        assert_eq!(next.stance.side, Side::Right);
        assert_eq!(sample.phase, Phase::SingleSupport);
    }

    #[test]
    fn stepping_in_place_keeps_the_sagittal_axis_still() {
        let log = run_scenario(&in_place()).unwrap();
        assert_eq!(log.samples.len(), 30);
        for s in &log.samples {
            assert!(s.x.position.abs() <= 1e-9 && s.x.velocity.abs() <= 1e-9 && s.jerk[0].abs() <= 1e-9);
        }
        // first landing at 0.1 s, then one every 0.6 s
        assert_eq!(log.footsteps.len(), 6);
        assert!(log.footsteps.windows(2).all(|w| w[0].side != w[1].side));
    }

    /// Solves every tick twice and keeps the largest cold/warm disagreement.
    struct ColdWarm(f64);

    impl QpSolver for ColdWarm {
        fn solve(
            &mut self,
            problem: &crate::condense::QpProblem,
            settings: &SolverSettings,
            warm: Option<&DVector<f64>>,
        ) -> Result<crate::solver::QpSolution> {
            let cold = crate::solver::solve(problem, settings, None)?;
            let hot = crate::solver::solve(problem, settings, warm)?;
            self.0 = self.0.max((&cold.u_star - &hot.u_star).amax());
            Ok(hot)
        }
    }

    #[test]
    fn warm_started_ticks_agree_with_cold_solves() {
        for p in preset_scenarios() {
            let mut sim = Simulator::with_solver(p.config, ColdWarm(0.0)).unwrap();
            sim.run().unwrap();
            assert!(sim.solver.0 <= 1e-6, "{}: {}", p.name, sim.solver.0);
        }
    }

    #[test]
    fn summary_of_a_motionless_log_is_zero() {
        let params = GaitParams::default();
        let foot = FootPose::new(0.0, 0.0, Side::Left);
        let samples = (0..30)
            .map(|k| Sample {
                time: (k + 1) as f64 * 0.1,
                x: AxisState::default(),
                y: AxisState::default(),
                zmp_x: 0.0,
                zmp_y: 0.0,
                rcof_x: 0.0,
                rcof_y: 0.0,
                mu_ap: 0.5,
                v_ref: 0.0,
                foot,
                step: k / 6,
                phase: Phase::SingleSupport,
                jerk: [0.0; 2],
                solver_status: SolveStatus::Optimal,
                solver_iterations: 1,
            })
            .collect();
        let log = TrajectoryLog {
            params,
            samples,
            footsteps: vec![foot; 5],
        };
        let m = summarize(&log);
        assert_eq!(m.steady_velocity_mean, 0.0);
        assert_eq!(m.steady_velocity_std, 0.0);
        assert_eq!(m.max_rcof_steady, 0.0);
        assert_eq!(m.max_constraint_violation, 0.0);
        assert!(m.step_lengths.iter().all(|&l| l == 0.0));
        assert_eq!(m.steps.len(), 5);
    }

    #[test]
    fn presets_carry_the_published_values() {
        let presets = preset_scenarios();
        let names: Vec<_> = presets.iter().map(|p| p.name).collect();
        assert_eq!(
            names,
            ["s1_beta", "s1_beta_gamma", "s1_delta_sweep", "s2_surface_change"]
        );
        for p in &presets {
            p.config.validate().unwrap();
            assert_eq!(p.config.params.horizon, 2 * p.config.params.cycle_ticks());
            assert_eq!(p.config.params.max_future_steps, 2);
        }
        let s2 = preset("s2_surface_change").unwrap().config;
        let mu_ap = |step: f64| s2.friction_schedule.available_at(step) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((mu_ap(7.0) - 0.4).abs() < 1e-12);
        assert!((mu_ap(8.0) - 0.16).abs() < 1e-12);
        assert!((s2.friction_schedule.available_at(0.0) - 0.56).abs() < 0.01);
        assert!((s2.friction_schedule.available_at(8.0) - 0.23).abs() < 0.01);
        assert_eq!((s2.weights.beta, s2.weights.gamma, s2.weights.delta), (1.0, 100.0, 1.0));
        let s1 = preset("s1_beta").unwrap().config;
        let v: Vec<_> = s1.velocity_schedule.iter().map(|b| (b.from, b.value)).collect();
        assert_eq!(v, [(0.0, 0.0), (2.0, 1.0), (8.0, 0.0)]);
        assert_eq!(s1.duration, 12.0);
        let sweep = preset("s1_delta_sweep").unwrap().sweep.unwrap();
        assert_eq!(sweep.grid.first(), Some(&0.0));
        assert_eq!(sweep.grid.last(), Some(&200.0));
    }
}
