//! Five-joint serial arm: DH forward kinematics, particle-swarm goal solving
//! and cubic joint-space trajectories.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

pub const DOF: usize = 5;

pub type JointVector<T> = [T; DOF];

type Mat4<T> = [[T; 4]; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid PSO parameters: {0}")]
    InvalidParams(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("target at distance {distance} mm is beyond the bounding reach {reach} mm")]
    Unreachable { distance: f64, reach: f64 },
    #[error("joint {joint} value {value} rad is outside its limits")]
    InfeasibleJoint { joint: usize, value: f64 },
    #[error("joint {joint} needs {required} rad/s but its cap is {cap} rad/s")]
    VelocityInfeasible {
        joint: usize,
        required: f64,
        cap: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = ArmError> = std::result::Result<T, E>;

/// One Denavit-Hartenberg row: `Rz(theta + offset) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow<T> {
    /// Link length, mm.
    pub a: T,
    /// Link twist, rad.
    pub alpha: T,
    /// Link offset, mm.
    pub d: T,
    /// Joint angle offset, rad.
    pub offset: T,
}

impl<T: Scalar> DhRow<T> {
    pub fn new(a: T, alpha: T, d: T, offset: T) -> Self {
        Self {
            a,
            alpha,
            d,
            offset,
        }
    }

    pub fn transform(&self, q: T) -> Mat4<T> {
        let (st, ct) = (q + self.offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let (z, o) = (T::zero(), T::one());
        [
            [ct, -st * ca, st * sa, self.a * ct],
            [st, ct * ca, -ct * sa, self.a * st],
            [z, sa, ca, self.d],
            [z, z, z, o],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain<T> {
    pub joints: [DhRow<T>; DOF],
    /// rad
    pub limits_low: JointVector<T>,
    /// rad
    pub limits_high: JointVector<T>,
    /// Per-joint speed caps for trajectories, rad/s.
    pub velocity_limits: JointVector<T>,
}

impl<T: Scalar> Default for KinematicChain<T> {
    /// Roughly 750 mm of reach: base column, shoulder, upper arm, forearm, wrist pitch, wrist roll.
    fn default() -> Self {
        let half_pi = T::FRAC_PI_2();
        let z = T::zero();
        Self {
            joints: [
                DhRow::new(z, half_pi, lit(127.0), z),
                DhRow::new(lit(305.0), z, z, half_pi),
                DhRow::new(lit(300.0), z, z, -half_pi),
                DhRow::new(z, half_pi, z, half_pi),
                DhRow::new(z, z, lit(150.0), z),
            ],
            limits_low: [-T::PI(), lit(-1.9), lit(-2.1), lit(-1.75), -T::PI()],
            limits_high: [T::PI(), lit(1.9), lit(1.6), lit(2.1), T::PI()],
            velocity_limits: [lit(1.5); DOF],
        }
    }
}

impl<T: Scalar> KinematicChain<T> {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.joints.iter().enumerate() {
            if ![row.a, row.alpha, row.d, row.offset]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(ArmError::InvalidChain(format!(
                    "joint {} has non-finite DH parameters",
                    i + 1
                )));
            }
        }
        for i in 0..DOF {
            if !(self.limits_low[i] < self.limits_high[i]) {
                return Err(ArmError::InvalidChain(format!(
                    "joint {} limits are not ordered",
                    i + 1
                )));
            }
            if !(self.velocity_limits[i] > T::zero()) {
                return Err(ArmError::InvalidChain(format!(
                    "joint {} velocity limit must be positive",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Sum of `|a| + |d|` over the chain; no reachable point lies farther from the base.
    pub fn bounding_reach(&self) -> T {
        self.joints
            .iter()
            .fold(T::zero(), |acc, r| acc + r.a.abs() + r.d.abs())
    }

    pub fn is_feasible(&self, q: &JointVector<T>) -> bool {
        (0..DOF).all(|i| q[i] >= self.limits_low[i] && q[i] <= self.limits_high[i])
    }

    pub fn clamp(&self, q: &JointVector<T>) -> JointVector<T> {
        std::array::from_fn(|i| q[i].max(self.limits_low[i]).min(self.limits_high[i]))
    }

    fn check_feasible(&self, q: &JointVector<T>) -> Result<()> {
        for (i, &qi) in q.iter().enumerate() {
            if !(qi >= self.limits_low[i] && qi <= self.limits_high[i]) {
                return Err(ArmError::InfeasibleJoint {
                    joint: i + 1,
                    value: qi.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Quadratic penalty on limit violation, rad^2.
    pub fn limit_penalty(&self, q: &JointVector<T>) -> T {
        (0..DOF).fold(T::zero(), |acc, i| {
            let below = (self.limits_low[i] - q[i]).max(T::zero());
            let above = (q[i] - self.limits_high[i]).max(T::zero());
            acc + below * below + above * above
        })
    }
}

/// End-effector position and approach direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    /// mm
    pub position: [T; 3],
    /// Unit vector along the tool z axis.
    pub approach: [T; 3],
}

impl<T: Scalar> Pose<T> {
    /// Normalizes `approach`; errors on a zero or non-finite direction.
    pub fn new(position: [T; 3], approach: [T; 3]) -> Result<Self> {
        let n = norm(&approach);
        if !(n > lit(1e-12)) || !n.is_finite() || !position.iter().all(|p| p.is_finite()) {
            return Err(ArmError::InvalidPose(
                "approach must be a finite non-zero vector".into(),
            ));
        }
        Ok(Self {
            position,
            approach: approach.map(|c| c / n),
        })
    }
}

fn norm<T: Scalar>(v: &[T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn mat_mul<T: Scalar>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut out = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

/// Homogeneous transform of the final frame in the base frame.
pub fn end_frame<T: Scalar>(chain: &KinematicChain<T>, q: &JointVector<T>) -> Mat4<T> {
    chain
        .joints
        .iter()
        .zip(q)
        .fold(identity(), |acc, (row, &qi)| {
            mat_mul(&acc, &row.transform(qi))
        })
}

fn identity<T: Scalar>() -> Mat4<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { T::one() } else { T::zero() }))
}

pub fn forward_kinematics<T: Scalar>(chain: &KinematicChain<T>, q: &JointVector<T>) -> Pose<T> {
    let m = end_frame(chain, q);
    Pose {
        position: [m[0][3], m[1][3], m[2][3]],
        approach: [m[0][2], m[1][2], m[2][2]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoParams<T> {
    pub particle_count: usize,
    pub iteration_count: usize,
    /// Inertia weight.
    pub inertia: T,
    /// Cognitive coefficient.
    pub cognitive: T,
    /// Social coefficient.
    pub social: T,
    pub seed: u64,
    /// Velocity clamp as a fraction of each joint's range.
    pub velocity_clamp: T,
    /// Iterations without a 0.1 % swarm improvement before the swarm is re-seeded.
    pub stall_iterations: usize,
    /// Restarts only happen while the best cost is above this.
    pub restart_threshold: T,
    /// Final cost above this sets the not-converged flag.
    pub convergence_threshold: T,
}

impl<T: Scalar> Default for PsoParams<T> {
    fn default() -> Self {
        Self {
            particle_count: 30,
            iteration_count: 200,
            inertia: lit(0.72),
            cognitive: lit(1.49),
            social: lit(1.49),
            seed: 0,
            velocity_clamp: lit(0.1),
            stall_iterations: 10,
            restart_threshold: lit(0.5),
            convergence_threshold: lit(2.0),
        }
    }
}

impl<T: Scalar> PsoParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(ArmError::InvalidParams(m.into()));
        if self.particle_count < 2 {
            return fail("particle_count must be at least 2");
        }
        if !(self.inertia >= T::zero() && self.inertia <= T::one()) {
            return fail("inertia must lie in [0, 1]");
        }
        if !(self.cognitive > T::zero() && self.social > T::zero()) {
            return fail("cognitive and social coefficients must be positive");
        }
        if !(self.velocity_clamp > T::zero()) {
            return fail("velocity_clamp must be positive");
        }
        if self.stall_iterations == 0 {
            return fail("stall_iterations must be positive");
        }
        Ok(())
    }
}

/// Cost weights: position error in mm plus these multiples of the other terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights<T> {
    /// mm per radian of approach-axis misalignment.
    pub direction: T,
    /// mm per rad^2 of limit violation.
    pub limit: T,
    /// mm per rad^2 of distance from `rest`; 0 disables the posture term.
    #[serde(default)]
    pub posture: T,
    #[serde(default)]
    pub rest: JointVector<T>,
}

impl<T: Scalar> Default for CostWeights<T> {
    fn default() -> Self {
        Self {
            direction: lit(0.5),
            limit: lit(100.0),
            posture: T::zero(),
            rest: [T::zero(); DOF],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown<T> {
    pub total: T,
    /// mm
    pub position_error: T,
    /// rad
    pub direction_error: T,
    pub limit_penalty: T,
}

pub fn goal_cost<T: Scalar>(
    chain: &KinematicChain<T>,
    q: &JointVector<T>,
    target: &Pose<T>,
    weights: &CostWeights<T>,
) -> CostBreakdown<T> {
    let pose = forward_kinematics(chain, q);
    let diff: [T; 3] = std::array::from_fn(|i| pose.position[i] - target.position[i]);
    let position_error = norm(&diff);
    let dot = (0..3).fold(T::zero(), |acc, i| {
        acc + pose.approach[i] * target.approach[i]
    });
    let direction_error = dot.max(-T::one()).min(T::one()).acos();
    let limit_penalty = chain.limit_penalty(q);
    let posture = if weights.posture > T::zero() {
        (0..DOF).fold(T::zero(), |acc, j| acc + (q[j] - weights.rest[j]).powi(2)) * weights.posture
    } else {
        T::zero()
    };
    CostBreakdown {
        total: position_error
            + weights.direction * direction_error
            + weights.limit * limit_penalty
            + posture,
        position_error,
        direction_error,
        limit_penalty,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoSolution<T> {
    pub q: JointVector<T>,
    pub cost: T,
    pub position_error: T,
    pub direction_error: T,
    /// False when the final cost is above the convergence threshold.
    pub converged: bool,
    /// Best cost found so far, after each iteration.
    pub history: Vec<T>,
    pub restarts: usize,
}

struct Swarm<T> {
    x: Vec<JointVector<T>>,
    v: Vec<JointVector<T>>,
    pbest: Vec<JointVector<T>>,
    pbest_cost: Vec<T>,
    gbest: JointVector<T>,
    gbest_cost: T,
}

/// Particle-swarm search for joint angles that put the tool at `target`.
///
/// Random numbers for every particle are drawn in a fixed order before each
/// parallel evaluation, so the result depends only on the seed.
pub fn pso_solve_goal<T: Scalar>(
    chain: &KinematicChain<T>,
    target: &Pose<T>,
    params: &PsoParams<T>,
    weights: &CostWeights<T>,
) -> Result<PsoSolution<T>> {
    chain.validate()?;
    params.validate()?;
    let distance = norm(&target.position);
    let reach = chain.bounding_reach();
    if !(distance <= reach) {
        return Err(ArmError::Unreachable {
            distance: distance.to_f64().unwrap_or(f64::NAN),
            reach: reach.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n = params.particle_count;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let lo = chain.limits_low;
    let hi = chain.limits_high;
    let vmax: JointVector<T> = std::array::from_fn(|j| params.velocity_clamp * (hi[j] - lo[j]));
    let cost_of = |q: &JointVector<T>| goal_cost(chain, q, target, weights).total;

    let spawn = |rng: &mut ChaCha8Rng| -> Swarm<T> {
        let x: Vec<JointVector<T>> = (0..n)
            .map(|_| std::array::from_fn(|j| lo[j] + (hi[j] - lo[j]) * T::sample_unit(rng)))
            .collect();
        let costs: Vec<T> = x.par_iter().map(cost_of).collect();
        let best = argmin(&costs);
        Swarm {
            v: vec![[T::zero(); DOF]; n],
            pbest: x.clone(),
            gbest: x[best],
            gbest_cost: costs[best],
            pbest_cost: costs,
            x,
        }
    };

    let mut swarm = spawn(&mut rng);
    let mut best = swarm.gbest;
    let mut best_cost = swarm.gbest_cost;
    let mut stalled = 0usize;
    let mut restarts = 0usize;
    let mut history = Vec::with_capacity(params.iteration_count);
    let improvement = T::one() - lit::<T>(1e-3);

    for _ in 0..params.iteration_count {
        let draws: Vec<(JointVector<T>, JointVector<T>)> = (0..n)
            .map(|_| {
                let r1 = std::array::from_fn(|_| T::sample_unit(&mut rng));
                let r2 = std::array::from_fn(|_| T::sample_unit(&mut rng));
                (r1, r2)
            })
            .collect();
        let gbest = swarm.gbest;
        let costs: Vec<T> = swarm
            .x
            .par_iter_mut()
            .zip(swarm.v.par_iter_mut())
            .zip(swarm.pbest.par_iter())
            .zip(draws.par_iter())
            .map(|(((x, v), pb), (r1, r2))| {
                for j in 0..DOF {
                    let vj = params.inertia * v[j]
                        + params.cognitive * r1[j] * (pb[j] - x[j])
                        + params.social * r2[j] * (gbest[j] - x[j]);
                    v[j] = vj.max(-vmax[j]).min(vmax[j]);
                    x[j] = (x[j] + v[j]).max(lo[j]).min(hi[j]);
                }
                cost_of(x)
            })
            .collect();

        for (i, &c) in costs.iter().enumerate() {
            if c < swarm.pbest_cost[i] {
                swarm.pbest_cost[i] = c;
                swarm.pbest[i] = swarm.x[i];
            }
        }
        let i = argmin(&swarm.pbest_cost);
        let swarm_best = swarm.pbest_cost[i];
        if swarm_best < swarm.gbest_cost * improvement {
            stalled = 0;
        } else {
            stalled += 1;
        }
        if swarm_best < swarm.gbest_cost {
            swarm.gbest_cost = swarm_best;
            swarm.gbest = swarm.pbest[i];
        }
        if swarm.gbest_cost < best_cost {
            best_cost = swarm.gbest_cost;
            best = swarm.gbest;
        }
        if stalled >= params.stall_iterations && best_cost > params.restart_threshold {
            swarm = spawn(&mut rng);
            stalled = 0;
            restarts += 1;
            if swarm.gbest_cost < best_cost {
                best_cost = swarm.gbest_cost;
                best = swarm.gbest;
            }
        }
        history.push(best_cost);
    }

    let q = chain.clamp(&best);
    let breakdown = goal_cost(chain, &q, target, weights);
    Ok(PsoSolution {
        q,
        cost: breakdown.total,
        position_error: breakdown.position_error,
        direction_error: breakdown.direction_error,
        converged: breakdown.total <= params.convergence_threshold,
        history,
        restarts,
    })
}

fn argmin<T: Scalar>(values: &[T]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < values[best] { i } else { best })
}

/// Joint-space path sampled at a uniform period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTrajectory<T> {
    /// s
    pub dt: T,
    pub waypoints: Vec<JointVector<T>>,
}

impl<T: Scalar> JointTrajectory<T> {
    pub fn duration(&self) -> T {
        self.dt * T::from_usize(self.waypoints.len().saturating_sub(1)).unwrap()
    }

    /// Writes `t_s,q1_rad,...,q5_rad`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,q1_rad,q2_rad,q3_rad,q4_rad,q5_rad")?;
        for (k, q) in self.waypoints.iter().enumerate() {
            let t = (self.dt * T::from_usize(k).unwrap()).to_f64().unwrap();
            write!(out, "{t:.4}")?;
            for v in q {
                write!(out, ",{:.9}", v.to_f64().unwrap())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Cubic time scaling `s = 3 tau^2 - 2 tau^3`.
pub fn cubic_scaling<T: Scalar>(tau: T) -> T {
    let tau = tau.max(T::zero()).min(T::one());
    tau * tau * (lit::<T>(3.0) - lit::<T>(2.0) * tau)
}

/// Straight joint-space move with zero end velocities.
///
/// The effective period is `duration / ceil(duration / dt)`, never longer than `dt`.
pub fn plan_trajectory<T: Scalar>(
    chain: &KinematicChain<T>,
    q_start: &JointVector<T>,
    q_goal: &JointVector<T>,
    duration: T,
    dt: T,
) -> Result<JointTrajectory<T>> {
    chain.validate()?;
    if !(duration > T::zero() && dt > T::zero()) {
        return Err(ArmError::InvalidArgument(
            "duration and dt must be positive".into(),
        ));
    }
    chain.check_feasible(q_start)?;
    chain.check_feasible(q_goal)?;
    // peak of ds/dt is 1.5 / duration at the midpoint
    let peak_rate = lit::<T>(1.5) / duration;
    for j in 0..DOF {
        let required = (q_goal[j] - q_start[j]).abs() * peak_rate;
        if required > chain.velocity_limits[j] {
            return Err(ArmError::VelocityInfeasible {
                joint: j + 1,
                required: required.to_f64().unwrap_or(f64::NAN),
                cap: chain.velocity_limits[j].to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let steps = (duration / dt).ceil().to_usize().unwrap_or(1).max(1);
    let step_dt = duration / T::from_usize(steps).unwrap();
    let waypoints = (0..=steps)
        .map(|k| {
            let s = cubic_scaling(T::from_usize(k).unwrap() / T::from_usize(steps).unwrap());
            let q: JointVector<T> =
                std::array::from_fn(|j| q_start[j] + s * (q_goal[j] - q_start[j]));
            chain.clamp(&q)
        })
        .collect();
    Ok(JointTrajectory {
        dt: step_dt,
        waypoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn translation_chain() -> KinematicChain<f64> {
        let mut joints = [DhRow::new(0.0, 0.0, 10.0, 0.0); DOF];
        joints[2].d = 25.0;
        KinematicChain {
            joints,
            ..KinematicChain::default()
        }
    }

    #[test]
    fn zero_pose_of_pure_offsets_sums_along_z() {
        let pose = forward_kinematics(&translation_chain(), &[0.0; DOF]);
        assert_relative_eq!(pose.position[2], 65.0, epsilon = 1e-12);
        assert_relative_eq!(pose.position[0], 0.0);
        assert_relative_eq!(pose.position[1], 0.0);
    }

    #[test]
    fn base_half_turn_negates_x_and_y() {
        let chain = KinematicChain::<f64>::default();
        let zero = forward_kinematics(&chain, &[0.0; DOF]);
        let turned = forward_kinematics(&chain, &[std::f64::consts::PI, 0.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(turned.position[0], -zero.position[0], epsilon = 1e-9);
        assert_relative_eq!(turned.position[1], -zero.position[1], epsilon = 1e-9);
        assert_relative_eq!(turned.position[2], zero.position[2], epsilon = 1e-9);
    }

    #[test]
    fn approach_is_unit() {
        let chain = KinematicChain::<f64>::default();
        let pose = forward_kinematics(&chain, &[0.3, -0.4, 0.9, 1.1, -2.0]);
        assert_relative_eq!(norm(&pose.approach), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beyond_reach_is_rejected() {
        let chain = KinematicChain::<f64>::default();
        let far = chain.bounding_reach() * 2.0;
        let target = Pose::new([far, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        let err = pso_solve_goal(
            &chain,
            &target,
            &PsoParams::default(),
            &CostWeights::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ArmError::Unreachable { .. }));
    }

    #[test]
    fn solve_is_seed_deterministic() {
        let chain = KinematicChain::<f64>::default();
        let target = forward_kinematics(&chain, &[0.2, 0.3, -0.5, 0.4, 0.1]);
        let params = PsoParams {
            seed: 9,
            ..PsoParams::default()
        };
        let a = pso_solve_goal(&chain, &target, &params, &CostWeights::default()).unwrap();
        let b = pso_solve_goal(&chain, &target, &params, &CostWeights::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_trajectory_for_equal_endpoints() {
        let chain = KinematicChain::<f64>::default();
        let q = [0.1, 0.2, 0.3, 0.4, 0.5];
        let traj = plan_trajectory(&chain, &q, &q, 2.0, 0.01).unwrap();
        assert!(traj.waypoints.iter().all(|w| *w == q));
    }

    #[test]
    fn cubic_midpoint_and_zero_end_velocity() {
        let chain = KinematicChain::<f64>::default();
        let a = [0.0; DOF];
        let b = [1.0, -0.5, 0.5, 0.2, -1.0];
        let traj = plan_trajectory(&chain, &a, &b, 2.0, 0.01).unwrap();
        let mid = traj.waypoints[traj.waypoints.len() / 2];
        for j in 0..DOF {
            assert_relative_eq!(mid[j], 0.5 * (a[j] + b[j]), epsilon = 1e-12);
        }
        assert_eq!(cubic_scaling(0.0), 0.0);
        let h = 1e-7;
        assert!((cubic_scaling(h) - cubic_scaling(0.0)) / h < 1e-6);
        assert!((cubic_scaling(1.0) - cubic_scaling(1.0 - h)) / h < 1e-6);
    }

    #[test]
    fn too_fast_move_is_rejected() {
        let chain = KinematicChain::<f64>::default();
        let err = plan_trajectory(&chain, &[0.0; DOF], &[3.0, 0.0, 0.0, 0.0, 0.0], 1.0, 0.01)
            .unwrap_err();
        assert!(matches!(err, ArmError::VelocityInfeasible { joint: 1, .. }));
    }

    #[test]
    fn csv_header() {
        let chain = KinematicChain::<f64>::default();
        let traj = plan_trajectory(&chain, &[0.0; DOF], &[0.1; DOF], 0.5, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,q1_rad,q2_rad,q3_rad,q4_rad,q5_rad\n"));
        assert_eq!(text.lines().count(), 1 + 6);
    }
}
