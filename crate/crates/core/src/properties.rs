//! Randomized checks of the structural invariants against the brute-force
//! references in [`crate::oracle`].

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condense::*;
use crate::gait::*;
use crate::lipm::*;
use crate::oracle::{enumerate_active_sets, roll_out, rollout_cost, rollout_feasible};
use crate::solver::{solve, SolveStatus, SolverSettings};

struct Fixture {
    params: GaitParams,
    matrices: HorizonMatrices,
    timeline: SupportTimeline,
    selection: SelectionMatrices,
    x: AxisState,
    y: AxisState,
    foot: FootPose,
}

impl Fixture {
    fn new(tick: usize, x: AxisState, y: AxisState, foot: FootPose) -> Self {
        let params = GaitParams::default();
        let timeline = build_timeline_at_tick(tick, &foot, &params).unwrap();
        Self {
            matrices: build_horizon_matrices(&params).unwrap(),
            selection: build_selection_matrices(&timeline),
            timeline,
            params,
            x,
            y,
            foot,
        }
    }

    fn preview(&self) -> Preview<'_> {
        Preview {
            params: &self.params,
            matrices: &self.matrices,
            selection: &self.selection,
            x_state: self.x,
            y_state: self.y,
            current_foot: self.foot,
        }
    }

    fn problem(&self, weights: &CostWeights, profile: &FrictionProfile) -> QpProblem {
        let p = self.preview();
        let m = self.timeline.future_steps;
        let vref = vec![[0.5, 0.0]; self.params.horizon];
        let nominal = nominal_footsteps(&self.foot, m, 0.3, 0.2);
        let cost = build_cost(&p, &vref, &nominal, weights).unwrap();
        let groups = [
            build_zmp_constraints(&p, &zmp_bounds(&self.timeline, &self.params)).unwrap(),
            build_friction_constraints(&p, profile).unwrap(),
            build_footstep_constraints(&footstep_bounds(&self.foot, m, &self.params), &self.foot, p.layout()).unwrap(),
        ];
        assemble(cost, &groups).unwrap()
    }
}

fn state() -> impl Strategy<Value = AxisState> {
    (-0.5..0.5f64, -1.0..1.0f64, -3.0..3.0f64).prop_map(|(p, v, a)| AxisState::new(p, v, a))
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Left), Just(Side::Right)]
}

fn weights() -> impl Strategy<Value = CostWeights> {
    (1e-6..1.0f64, 0.1..10.0f64, 0.0..200.0f64, 0.0..200.0f64, 1e-6..1.0f64).prop_map(|(a, b, g, d, e)| CostWeights {
        alpha_jerk: a,
        beta: b,
        gamma: g,
        delta: d,
        epsilon_foot: e,
    })
}

fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(1..=10);
    let rows = rng.gen_range(0..=20);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let hessian = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let gradient = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let lhs = DMatrix::from_fn(rows, n, |_, _| rng.gen_range(-1.0..1.0));
    // feasible by construction: a known point satisfies every row
    let anchor = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let rhs = &lhs * &anchor + DVector::from_fn(rows, |_, _| rng.gen_range(0.0..1.0));
    QpProblem::new(hessian, gradient, lhs, rhs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stacked_prediction_matches_rollout(n in 1usize..25, s in state(), seed in any::<u64>()) {
        let params = GaitParams { horizon: n, ..GaitParams::default() };
        let m = build_horizon_matrices(&params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jerks = DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0));
        let pred = m.predict(s, &jerks);
        let states = roll_out(s, jerks.as_slice(), params.interval);
        for (i, r) in states.iter().enumerate() {
            prop_assert!((pred.positions[i] - r.position).abs() <= 1e-12 * (1.0 + r.position.abs()));
            prop_assert!((pred.velocities[i] - r.velocity).abs() <= 1e-12 * (1.0 + r.velocity.abs()));
            let z = r.position - params.zmp_lever() * r.acceleration;
            prop_assert!((pred.zmps[i] - z).abs() <= 1e-12 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn predictions_are_causal(n in 2usize..20, s in state(), k in 0usize..20, bump in -5.0..5.0f64) {
        let k = k % n;
        let params = GaitParams { horizon: n, ..GaitParams::default() };
        let m = build_horizon_matrices(&params).unwrap();
        let base = DVector::zeros(n);
        let mut hit = base.clone();
        hit[k] = bump;
        let (a, b) = (m.predict(s, &base), m.predict(s, &hit));
        for i in 0..k {
            prop_assert_eq!(a.positions[i], b.positions[i]);
            prop_assert_eq!(a.zmps[i], b.zmps[i]);
        }
    }

    #[test]
    fn quadratic_form_matches_rollout_cost(
        tick in 0usize..6, x in state(), y in state(), side in side(), w in weights(), seed in any::<u64>(),
    ) {
        let fx = Fixture::new(tick, x, y, FootPose::new(0.1, 0.1 * side.lateral_sign(), side));
        let p = fx.preview();
        let lay = p.layout();
        let vref = vec![[0.7, 0.0]; fx.params.horizon];
        let nominal = nominal_footsteps(&fx.foot, lay.steps, 0.3, 0.2);
        let cost = build_cost(&p, &vref, &nominal, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DVector::from_fn(lay.dim(), |_, _| rng.gen_range(-2.0..2.0));
        let zero = DVector::zeros(lay.dim());
        let quad = |v: &DVector<f64>| 0.5 * v.dot(&(&cost.hessian * v)) + cost.gradient.dot(v);
        // the condensed form drops the u-independent constant
        let lhs = quad(&u) - quad(&zero);
        let rhs = rollout_cost(&p, &vref, &nominal, &w, &u) - rollout_cost(&p, &vref, &nominal, &w, &zero);
        let scale = rollout_cost(&p, &vref, &nominal, &w, &u).abs().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn hessian_is_symmetric_positive_definite(tick in 0usize..6, side in side(), w in weights()) {
        let fx = Fixture::new(tick, AxisState::default(), AxisState::default(), FootPose::new(0.0, 0.0, side));
        let p = fx.preview();
        let lay = p.layout();
        let cost = build_cost(&p, &vec![[0.0; 2]; fx.params.horizon], &vec![[0.0; 2]; lay.steps], &w).unwrap();
        let q = &cost.hessian;
        prop_assert!((q - q.transpose()).amax() <= 1e-12 * q.amax());
        let eig = q.clone().symmetric_eigenvalues();
        prop_assert!(eig.min() > 0.0, "min eigenvalue {}", eig.min());
    }

    #[test]
    fn condensed_rows_match_rollout_membership(
        tick in 0usize..6, x0 in -0.05..0.05f64, side in side(), seed in any::<u64>(), spread in 1e-4..1e-1f64,
    ) {
        let lateral = 0.1 * side.lateral_sign();
        let fx = Fixture::new(tick, AxisState::at_rest(x0), AxisState::at_rest(lateral), FootPose::new(0.0, lateral, side));
        let profile = FrictionProfile::uniform(0.7, fx.params.horizon).unwrap();
        let qp = fx.problem(&CostWeights { gamma: 100.0, ..CostWeights::default() }, &profile);
        let base = solve(&qp, &SolverSettings::default(), None).unwrap();
        prop_assume!(base.status == SolveStatus::Optimal);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = &base.u_star + DVector::from_fn(qp.dim(), |_, _| rng.gen_range(-spread..spread));
        let gap = &qp.lhs * &u - &qp.rhs;
        // rows exactly on the boundary may round either way in the two evaluations
        prop_assume!(gap.iter().all(|g| g.abs() > 1e-9));
        let p = fx.preview();
        let steps = footstep_bounds(&fx.foot, fx.timeline.future_steps, &fx.params);
        let rolled = rollout_feasible(&p, &zmp_bounds(&fx.timeline, &fx.params), &steps, Some(&profile), &u);
        prop_assert_eq!(gap.iter().all(|&g| g <= 0.0), rolled);
    }

    #[test]
    fn solver_matches_active_set_enumeration(seed in any::<u64>()) {
        let qp = random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let (u, _) = enumerate_active_sets(&qp).expect("feasible by construction");
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((&sol.u_star - &u).amax() <= 1e-6);
    }

    #[test]
    fn solution_is_invariant_to_cost_scaling(seed in any::<u64>(), c in 1e-2..1e2f64) {
        let qp = random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut scaled = qp.clone();
        scaled.hessian *= c;
        scaled.gradient *= c;
        let settings = SolverSettings::default();
        let a = solve(&qp, &settings, None).unwrap();
        let b = solve(&scaled, &settings, None).unwrap();
        prop_assert!((&a.u_star - &b.u_star).amax() <= 1e-9 * (1.0 + a.u_star.amax()));
    }

    #[test]
    fn warm_start_never_moves_the_minimizer(seed in any::<u64>(), noise in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_qp(&mut rng);
        let settings = SolverSettings::default();
        let cold = solve(&qp, &settings, None).unwrap();
        let guess = &cold.u_star + DVector::from_fn(qp.dim(), |_, _| rng.gen_range(-noise..=noise));
        let warm = solve(&qp, &settings, Some(&guess)).unwrap();
        prop_assert_eq!(warm.status, SolveStatus::Optimal);
        prop_assert!((&cold.u_star - &warm.u_star).amax() <= 1e-6);
    }

    #[test]
    fn solves_are_bit_deterministic(seed in any::<u64>()) {
        let qp = random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let settings = SolverSettings::default();
        let (a, b) = (solve(&qp, &settings, None).unwrap(), solve(&qp, &settings, None).unwrap());
        prop_assert_eq!(a.u_star.as_slice(), b.u_star.as_slice());
        prop_assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn every_reachable_timeline_partitions_rows(tick in 0usize..6, steps in 2usize..5, side in side()) {
        let params = GaitParams::default().with_step_horizon(steps);
        let tl = build_timeline_at_tick(tick, &FootPose::new(0.0, 0.0, side), &params).unwrap();
        let sel = build_selection_matrices(&tl);
        for i in 0..tl.len() {
            let ones = sel.current[i] + sel.future.row(i).sum();
            prop_assert_eq!(ones, 1.0);
        }
        prop_assert!(tl.future_steps <= params.max_future_steps);
    }
}

#[test]
fn membership_checks_see_both_outcomes() {
    let fx = Fixture::new(
        3,
        AxisState::at_rest(0.0),
        AxisState::at_rest(0.1),
        FootPose::new(0.0, 0.1, Side::Left),
    );
    let profile = FrictionProfile::uniform(0.7, fx.params.horizon).unwrap();
    let qp = fx.problem(
        &CostWeights {
            gamma: 100.0,
            ..CostWeights::default()
        },
        &profile,
    );
    let base = solve(&qp, &SolverSettings::default(), None).unwrap().u_star;
    let p = fx.preview();
    let steps = footstep_bounds(&fx.foot, fx.timeline.future_steps, &fx.params);
    let zmp = zmp_bounds(&fx.timeline, &fx.params);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut inside, mut outside) = (0, 0);
    for k in 0..400 {
        let spread = if k % 2 == 0 { 1e-4 } else { 0.5 };
        let u = &base + DVector::from_fn(qp.dim(), |_, _| rng.gen_range(-spread..spread));
        let gap = &qp.lhs * &u - &qp.rhs;
        if gap.iter().any(|g| g.abs() <= 1e-9) {
            continue;
        }
        let rows_ok = gap.iter().all(|&g| g <= 0.0);
        assert_eq!(rows_ok, rollout_feasible(&p, &zmp, &steps, Some(&profile), &u));
        if rows_ok {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    assert!(inside > 20 && outside > 20, "inside {inside}, outside {outside}");
}
