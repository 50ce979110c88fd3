use auxgrip::arm::{
    cubic_scaling, end_frame, forward_kinematics, goal_cost, plan_trajectory, pso_solve_goal,
    ArmError, CostWeights, KinematicChain, Pose, PsoParams, DOF,
};
use nalgebra::{Matrix4, Rotation3, Translation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard DH composition built from nalgebra primitives.
fn oracle_frame(chain: &KinematicChain<f64>, q: &[f64; DOF]) -> Matrix4<f64> {
    chain
        .joints
        .iter()
        .zip(q)
        .fold(Matrix4::identity(), |acc, (row, &qi)| {
            let rz =
                Rotation3::from_axis_angle(&Vector3::z_axis(), qi + row.offset).to_homogeneous();
            let tz = Translation3::new(0.0, 0.0, row.d).to_homogeneous();
            let tx = Translation3::new(row.a, 0.0, 0.0).to_homogeneous();
            let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), row.alpha).to_homogeneous();
            acc * rz * tz * tx * rx
        })
}

fn random_q(chain: &KinematicChain<f64>, rng: &mut impl Rng) -> [f64; DOF] {
    std::array::from_fn(|j| rng.random_range(chain.limits_low[j]..=chain.limits_high[j]))
}

#[test]
fn forward_kinematics_matches_nalgebra_over_1000_configurations() {
    let chain = KinematicChain::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = random_q(&chain, &mut rng);
        let ours = end_frame(&chain, &q);
        let oracle = oracle_frame(&chain, &q);
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((ours[i][j] - oracle[(i, j)]).abs());
            }
        }
    }
    assert!(worst <= 1e-9, "max element gap {worst:e}");
}

#[test]
fn pose_constructor_rejects_zero_approach() {
    assert!(matches!(
        Pose::new([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        Err(ArmError::InvalidPose(_))
    ));
}

#[test]
fn converged_solution_reaches_reported_cost() {
    let chain = KinematicChain::<f64>::default();
    let target = forward_kinematics(&chain, &[0.4, 0.3, -0.6, 0.2, 0.0]);
    let weights = CostWeights::default();
    let sol = pso_solve_goal(&chain, &target, &PsoParams::default(), &weights).unwrap();
    let check = goal_cost(&chain, &sol.q, &target, &weights);
    assert!((check.total - sol.cost).abs() < 1e-9);
    assert!(sol.converged);
    assert!(chain.is_feasible(&sol.q));
    assert_eq!(
        sol.history.len(),
        PsoParams::<f64>::default().iteration_count
    );
}

#[test]
fn velocity_cap_is_enforced_and_named() {
    let chain = KinematicChain::<f64>::default();
    let goal = [3.0, 0.0, 0.0, 0.0, 0.0];
    let err = plan_trajectory(&chain, &[0.0; DOF], &goal, 1.0, 0.01).unwrap_err();
    assert!(
        matches!(err, ArmError::VelocityInfeasible { joint: 1, .. }),
        "{err:?}"
    );
    assert!(plan_trajectory(&chain, &[0.0; DOF], &goal, 4.0, 0.01).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pso_history_never_increases(seed in any::<u64>(), target_seed in any::<u64>()) {
        let chain = KinematicChain::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(target_seed);
        let target = forward_kinematics(&chain, &random_q(&chain, &mut rng));
        let params = PsoParams { seed, particle_count: 12, iteration_count: 40, ..PsoParams::default() };
        let sol = pso_solve_goal(&chain, &target, &params, &CostWeights::default()).unwrap();
        prop_assert!(sol.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*sol.history.last().unwrap(), sol.cost);
    }
}

proptest! {
    #[test]
    fn trajectory_stays_in_limits_and_hits_endpoints(
        a in prop::array::uniform5(-1.0f64..1.0),
        b in prop::array::uniform5(-1.0f64..1.0),
        duration in 2.0f64..6.0,
        dt in 0.01f64..0.2,
    ) {
        let chain = KinematicChain::<f64>::default();
        let traj = plan_trajectory(&chain, &a, &b, duration, dt).unwrap();
        prop_assert!(traj.dt <= dt + 1e-12);
        prop_assert_eq!(traj.waypoints.first().unwrap(), &a);
        let last = traj.waypoints.last().unwrap();
        for j in 0..DOF {
            prop_assert!((last[j] - b[j]).abs() < 1e-12);
        }
        prop_assert!(traj.waypoints.iter().all(|q| chain.is_feasible(q)));
        // Joint motion is monotone between the endpoints.
        for j in 0..DOF {
            let dir = (b[j] - a[j]).signum();
            prop_assert!(traj.waypoints.windows(2).all(|w| (w[1][j] - w[0][j]) * dir >= -1e-12));
        }
    }

    #[test]
    fn cubic_scaling_is_monotone_on_unit_interval(s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        prop_assert!(cubic_scaling(lo) <= cubic_scaling(hi));
        prop_assert!((cubic_scaling(s) + cubic_scaling(1.0 - s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approach_axis_is_unit(q in prop::array::uniform5(-3.0f64..3.0)) {
        let chain = KinematicChain::<f64>::default();
        let p = forward_kinematics(&chain, &q);
        let n = p.approach.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-12);
        let r = p.position.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(r <= chain.bounding_reach() + 1e-9);
    }
}
