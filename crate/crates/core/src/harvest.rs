//! Picking-cycle simulation: staged state machine with calibrated failure
//! injection, and Monte Carlo campaign statistics.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{
    forward_kinematics, plan_trajectory, pso_solve_goal, ArmError, CostWeights, JointVector,
    KinematicChain, Pose, PsoParams,
};
use crate::control::{ControlError, GraspRig, PidGains};
use crate::perception::perturb_point;
use crate::plant::{min_grasp_force, sample_table, PlantError, ReferencePolicy, TomatoSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarvestError {
    #[error("invalid harvest configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Arm(#[from] ArmError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

pub type Result<T, E = HarvestError> = std::result::Result<T, E>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarvestError::ConfigInvalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarvestStage {
    Approach,
    Separation,
    Cutting,
    Grasping,
    Departure,
    Release,
}

impl HarvestStage {
    pub const ALL: [HarvestStage; 6] = [
        HarvestStage::Approach,
        HarvestStage::Separation,
        HarvestStage::Cutting,
        HarvestStage::Grasping,
        HarvestStage::Departure,
        HarvestStage::Release,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            HarvestStage::Approach => "approach",
            HarvestStage::Separation => "separation",
            HarvestStage::Cutting => "cutting",
            HarvestStage::Grasping => "grasping",
            HarvestStage::Departure => "departure",
            HarvestStage::Release => "release",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    PedicelMisalignment,
    KeypointDepthError,
    TransferSlip,
}

impl FailureMode {
    pub const ALL: [FailureMode; 3] = [
        FailureMode::PedicelMisalignment,
        FailureMode::KeypointDepthError,
        FailureMode::TransferSlip,
    ];

    pub fn stage(self) -> HarvestStage {
        match self {
            FailureMode::PedicelMisalignment | FailureMode::KeypointDepthError => {
                HarvestStage::Cutting
            }
            FailureMode::TransferSlip => HarvestStage::Departure,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FailureMode::PedicelMisalignment => "pedicel_misalignment",
            FailureMode::KeypointDepthError => "keypoint_depth_error",
            FailureMode::TransferSlip => "transfer_slip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "mode", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Fail(FailureMode),
}

/// Lognormal stage durations parameterized by their means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTimingModel {
    /// Mean duration per stage in [`HarvestStage::ALL`] order, s.
    pub means: [f64; 6],
    /// Log-space standard deviation shared by all stages.
    pub sigma: f64,
    /// Relative change of every mean per mm of diameter above `reference_diameter`.
    #[serde(default)]
    pub diameter_scaling: f64,
    #[serde(default = "default_reference_diameter")]
    pub reference_diameter: f64,
}

fn default_reference_diameter() -> f64 {
    50.0
}

impl Default for StageTimingModel {
    fn default() -> Self {
        Self {
            means: [6.0, 4.0, 3.0, 4.0, 5.0, 2.34],
            sigma: 0.15,
            diameter_scaling: 0.0,
            reference_diameter: default_reference_diameter(),
        }
    }
}

impl StageTimingModel {
    pub fn validate(&self) -> Result<()> {
        if self.means.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return invalid("timing.means must all be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid("timing.sigma must be non-negative");
        }
        if !self.diameter_scaling.is_finite() || !(self.reference_diameter > 0.0) {
            return invalid(
                "timing.diameter_scaling must be finite and reference_diameter positive",
            );
        }
        Ok(())
    }

    pub fn total_mean(&self) -> f64 {
        self.means.iter().sum()
    }

    pub fn mean_for(&self, stage: HarvestStage, diameter: f64) -> f64 {
        let scale = (1.0 + self.diameter_scaling * (diameter - self.reference_diameter)).max(0.05);
        self.means[stage.index()] * scale
    }

    /// Lognormal draw with the stage mean: `exp(ln m - sigma^2 / 2 + sigma z)`.
    pub fn sample<R: Rng + ?Sized>(&self, stage: HarvestStage, diameter: f64, rng: &mut R) -> f64 {
        let mean = self.mean_for(stage, diameter);
        let mu = mean.ln() - 0.5 * self.sigma * self.sigma;
        <f64 as crate::scalar::Scalar>::sample_normal(rng, mu, self.sigma).exp()
    }
}

/// Equal per-mode fault probability `p` with `(1 - p)^3 = target_success`.
pub fn calibrate_failure_rates(target_success: f64) -> Result<f64> {
    if !(target_success > 0.0 && target_success <= 1.0) {
        return invalid("target success must lie in (0, 1]");
    }
    Ok(1.0 - target_success.cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureRates {
    pub pedicel_misalignment: f64,
    pub keypoint_depth_error: f64,
    pub transfer_slip: f64,
}

impl FailureRates {
    pub fn equal(p: f64) -> Self {
        Self {
            pedicel_misalignment: p,
            keypoint_depth_error: p,
            transfer_slip: p,
        }
    }

    pub fn none() -> Self {
        Self::equal(0.0)
    }

    pub fn get(&self, mode: FailureMode) -> f64 {
        match mode {
            FailureMode::PedicelMisalignment => self.pedicel_misalignment,
            FailureMode::KeypointDepthError => self.keypoint_depth_error,
            FailureMode::TransferSlip => self.transfer_slip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for mode in FailureMode::ALL {
            let p = self.get(mode);
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("failure.{} must lie in [0, 1]", mode.name()));
            }
        }
        Ok(())
    }
}

impl Default for FailureRates {
    fn default() -> Self {
        Self::equal(1.0 - 0.8f64.cbrt())
    }
}

/// How an injected fault is realized physically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultMechanics {
    /// Cutting tolerance on the lateral pedicel keypoint error, mm.
    pub cut_tolerance: f64,
    /// Accepted depth error of the pedicel keypoint, mm.
    pub depth_window: f64,
    /// Injected lateral offset range as multiples of `cut_tolerance`.
    pub pedicel_offset: [f64; 2],
    /// Injected depth error range as multiples of `depth_window`.
    pub depth_offset: [f64; 2],
    /// Grasp reference multiplier applied when a slip fault is injected.
    pub slip_reference_factor: f64,
    pub contacts: u32,
    pub slip_safety: f64,
}

impl Default for FaultMechanics {
    fn default() -> Self {
        Self {
            cut_tolerance: 5.0,
            depth_window: 10.0,
            pedicel_offset: [1.5, 3.0],
            depth_offset: [1.5, 3.0],
            slip_reference_factor: 0.3,
            contacts: 6,
            slip_safety: 1.5,
        }
    }
}

impl FaultMechanics {
    pub fn validate(&self) -> Result<()> {
        if !(self.cut_tolerance > 0.0 && self.depth_window > 0.0) {
            return invalid("mechanics.cut_tolerance and depth_window must be positive");
        }
        for (name, r) in [
            ("pedicel_offset", self.pedicel_offset),
            ("depth_offset", self.depth_offset),
        ] {
            if !(r[0] > 1.0 && r[0] <= r[1]) {
                return invalid(format!("mechanics.{name} must satisfy 1 < lo <= hi"));
            }
        }
        if !(self.slip_reference_factor >= 0.0 && self.slip_reference_factor < 1.0) {
            return invalid("mechanics.slip_reference_factor must lie in [0, 1)");
        }
        if self.contacts == 0 || !(self.slip_safety >= 1.0) {
            return invalid("mechanics.contacts must be >= 1 and slip_safety >= 1");
        }
        Ok(())
    }
}

/// Keypoint noise of the on-board detector during cutting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestPerception {
    /// mm, camera-plane axes
    pub keypoint_sigma: f64,
    /// mm, depth axis
    pub depth_sigma: f64,
    /// Pedicel height above the fruit top, mm.
    pub stem_offset: f64,
    /// Infrared proximity trigger distance, mm.
    pub proximity_threshold: f64,
}

impl Default for HarvestPerception {
    fn default() -> Self {
        Self {
            keypoint_sigma: 1.0,
            depth_sigma: 1.0,
            stem_offset: 10.0,
            proximity_threshold: 30.0,
        }
    }
}

/// Infrared proximity sensor: triggers when the fruit is within `threshold` mm.
pub fn proximity_triggered(distance: f64, threshold: f64) -> bool {
    distance <= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmTask {
    pub chain: KinematicChain<f64>,
    pub pso: PsoParams<f64>,
    pub weights: CostWeights<f64>,
    /// rad
    pub home: JointVector<f64>,
    pub pick: Pose<f64>,
    pub place: Pose<f64>,
    /// Trajectory sampling period, s.
    pub trajectory_dt: f64,
    /// Largest accepted goal position error, mm.
    pub goal_tolerance: f64,
}

impl Default for ArmTask {
    fn default() -> Self {
        let home = [0.0; 5];
        Self {
            chain: KinematicChain::default(),
            pso: PsoParams::default(),
            weights: CostWeights {
                direction: 50.0,
                posture: 1.0,
                rest: home,
                ..CostWeights::default()
            },
            home,
            pick: Pose {
                position: [400.0, 0.0, 350.0],
                approach: [1.0, 0.0, 0.0],
            },
            place: Pose {
                position: [0.0, 400.0, 300.0],
                approach: [0.0, 1.0, 0.0],
            },
            trajectory_dt: 0.05,
            goal_tolerance: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestConfig {
    pub timing: StageTimingModel,
    pub failure: FailureRates,
    pub mechanics: FaultMechanics,
    pub perception: HarvestPerception,
    pub rig: GraspRig<f64>,
    pub gains: PidGains<f64>,
    pub reference: ReferencePolicy<f64>,
    /// Simulated grasp length, s.
    pub grasp_duration: f64,
    pub arm: ArmTask,
    /// Fruit drawn uniformly per trial.
    pub tomatoes: Vec<TomatoSample<f64>>,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            timing: StageTimingModel::default(),
            failure: FailureRates::default(),
            mechanics: FaultMechanics::default(),
            perception: HarvestPerception::default(),
            rig: GraspRig::default(),
            gains: PidGains::nominal(),
            reference: ReferencePolicy::mass_scaled_default(),
            grasp_duration: 5.0,
            arm: ArmTask::default(),
            tomatoes: sample_table(),
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        self.failure.validate()?;
        self.mechanics.validate()?;
        let p = &self.perception;
        if !(p.keypoint_sigma >= 0.0
            && p.depth_sigma >= 0.0
            && p.stem_offset >= 0.0
            && p.proximity_threshold > 0.0)
        {
            return invalid("perception sigmas and stem_offset must be non-negative, proximity_threshold positive");
        }
        self.rig.validate()?;
        self.gains.validate()?;
        self.reference.validate()?;
        if !(self.grasp_duration > 0.0) {
            return invalid("grasp_duration must be positive");
        }
        self.arm.chain.validate()?;
        self.arm.pso.validate()?;
        if !(self.arm.trajectory_dt > 0.0 && self.arm.goal_tolerance > 0.0) {
            return invalid("arm.trajectory_dt and arm.goal_tolerance must be positive");
        }
        if !self.arm.chain.is_feasible(&self.arm.home) {
            return invalid("arm.home is outside the joint limits");
        }
        if self.tomatoes.is_empty() {
            return invalid("at least one tomato sample is required");
        }
        for t in &self.tomatoes {
            t.validate()?;
        }
        Ok(())
    }
}

/// Closed Euclidean test: the cut proceeds iff `|pedicel_kp - cutter_ref| <= tol`.
pub fn cutting_criterion(pedicel_kp: &[f64; 3], cutter_ref: &[f64; 3], tol: f64) -> bool {
    let d2: f64 = (0..3)
        .map(|i| (pedicel_kp[i] - cutter_ref[i]).powi(2))
        .sum();
    d2.sqrt() <= tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub tomato: String,
    pub outcome: Outcome,
    /// Per-stage duration in [`HarvestStage::ALL`] order; `None` for stages not reached.
    pub durations: [Option<f64>; 6],
    /// s
    pub total: f64,
    /// Peak true grasp force, N; `None` if grasping was not reached.
    pub peak_force: Option<f64>,
    pub proximity_triggered: bool,
}

impl TrialRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn failure_mode(&self) -> Option<FailureMode> {
        match self.outcome {
            Outcome::Success => None,
            Outcome::Fail(m) => Some(m),
        }
    }
}

pub const RECORDS_HEADER: &str = "trial,outcome,failure_mode,t_approach,t_separation,t_cutting,t_grasping,t_departure,t_release,total_s,peak_force_N,tomato";

/// Writes one CSV row per record; unreached stages are left empty.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        let (outcome, mode) = match r.outcome {
            Outcome::Success => ("success", ""),
            Outcome::Fail(m) => ("fail", m.name()),
        };
        write!(out, "{},{},{}", r.trial, outcome, mode)?;
        for d in &r.durations {
            match d {
                Some(v) => write!(out, ",{v:.6}")?,
                None => write!(out, ",")?,
            }
        }
        write!(out, ",{:.6},", r.total)?;
        if let Some(f) = r.peak_force {
            write!(out, "{f:.6}")?;
        }
        writeln!(out, ",{}", r.tomato)?;
    }
    Ok(())
}

/// Faults that fire in a trial before the stage logic runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InjectedFaults {
    pub pedicel: bool,
    pub depth: bool,
    pub slip: bool,
}

/// Draws one Bernoulli per mode, then keeps a single uniformly chosen fault among those that fired.
pub fn draw_faults<R: Rng + ?Sized>(rates: &FailureRates, rng: &mut R) -> InjectedFaults {
    let fired: Vec<FailureMode> = FailureMode::ALL
        .into_iter()
        .filter(|&m| rng.random::<f64>() < rates.get(m))
        .collect();
    let pick = rng.random::<f64>();
    let mut faults = InjectedFaults::default();
    if !fired.is_empty() {
        let idx = ((pick * fired.len() as f64) as usize).min(fired.len() - 1);
        match fired[idx] {
            FailureMode::PedicelMisalignment => faults.pedicel = true,
            FailureMode::KeypointDepthError => faults.depth = true,
            FailureMode::TransferSlip => faults.slip = true,
        }
    }
    faults
}

/// Campaign runner holding the arm goals solved once from the configuration.
#[derive(Debug, Clone)]
pub struct Harvester {
    pub config: HarvestConfig,
    pub pick_q: JointVector<f64>,
    pub place_q: JointVector<f64>,
}

impl Harvester {
    pub fn new(config: HarvestConfig) -> Result<Self> {
        config.validate()?;
        let arm = &config.arm;
        let solve = |pose: &Pose<f64>, name: &str| -> Result<JointVector<f64>> {
            let sol = pso_solve_goal(&arm.chain, pose, &arm.pso, &arm.weights)?;
            if sol.position_error > arm.goal_tolerance {
                return invalid(format!(
                    "arm.{name} pose not reached: position error {:.3} mm",
                    sol.position_error
                ));
            }
            Ok(sol.q)
        };
        let pick_q = solve(&arm.pick, "pick")?;
        let place_q = solve(&arm.place, "place")?;
        Ok(Self {
            config,
            pick_q,
            place_q,
        })
    }

    /// One picking cycle with its own seeded source.
    pub fn run_trial(&self, trial: u64, seed: u64) -> Result<TrialRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.config;
        let tomato = &cfg.tomatoes[rng.random_range(0..cfg.tomatoes.len())];
        let faults = draw_faults(&cfg.failure, &mut rng);
        self.run_trial_with(trial, tomato, faults, &mut rng)
    }

    /// Runs the stage sequence for a given fruit and fault set.
    pub fn run_trial_with<R: Rng + ?Sized>(
        &self,
        trial: u64,
        tomato: &TomatoSample<f64>,
        faults: InjectedFaults,
        rng: &mut R,
    ) -> Result<TrialRecord> {
        let cfg = &self.config;
        let arm = &cfg.arm;
        let mech = &cfg.mechanics;
        let timing: [f64; 6] =
            HarvestStage::ALL.map(|s| cfg.timing.sample(s, tomato.diameter, rng));
        let mut durations = [None; 6];
        let record = |stage: HarvestStage, durations: &mut [Option<f64>; 6]| {
            durations[stage.index()] = Some(timing[stage.index()]);
        };
        let finish = |outcome, durations: [Option<f64>; 6], peak_force, proximity| TrialRecord {
            trial,
            tomato: tomato.id.clone(),
            outcome,
            total: durations.iter().flatten().sum(),
            durations,
            peak_force,
            proximity_triggered: proximity,
        };

        // Approach
        plan_trajectory(
            &arm.chain,
            &arm.home,
            &self.pick_q,
            timing[0],
            arm.trajectory_dt,
        )?;
        let reached = forward_kinematics(&arm.chain, &self.pick_q).position;
        let gap: f64 = (0..3)
            .map(|i| (reached[i] - arm.pick.position[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let proximity = proximity_triggered(gap, cfg.perception.proximity_threshold);
        record(HarvestStage::Approach, &mut durations);

        // Separation
        record(HarvestStage::Separation, &mut durations);

        // Cutting: the cutter goes to the perceived pedicel; compare it with the real one.
        let center = arm.pick.position;
        let pedicel = [
            center[0],
            center[1] + 0.5 * tomato.diameter + cfg.perception.stem_offset,
            center[2],
        ];
        // The pick pose approaches along +x, so depth from the gripper camera is x.
        let mut kp = perturb_point(
            &[pedicel[1], pedicel[2], pedicel[0]],
            cfg.perception.keypoint_sigma,
            cfg.perception.depth_sigma,
            rng,
        );
        let truth = [pedicel[1], pedicel[2], pedicel[0]];
        let offset_scale =
            rng.random_range(mech.pedicel_offset[0]..=mech.pedicel_offset[1]) * mech.cut_tolerance;
        let offset_angle = rng.random_range(0.0..std::f64::consts::TAU);
        let depth_scale =
            rng.random_range(mech.depth_offset[0]..=mech.depth_offset[1]) * mech.depth_window;
        let depth_sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        if faults.pedicel {
            kp[0] += offset_scale * offset_angle.cos();
            kp[1] += offset_scale * offset_angle.sin();
        }
        if faults.depth {
            kp[2] += depth_sign * depth_scale;
        }
        record(HarvestStage::Cutting, &mut durations);
        if (kp[2] - truth[2]).abs() > mech.depth_window {
            return Ok(finish(
                Outcome::Fail(FailureMode::KeypointDepthError),
                durations,
                None,
                proximity,
            ));
        }
        if !cutting_criterion(
            &[kp[0], kp[1], 0.0],
            &[truth[0], truth[1], 0.0],
            mech.cut_tolerance,
        ) {
            return Ok(finish(
                Outcome::Fail(FailureMode::PedicelMisalignment),
                durations,
                None,
                proximity,
            ));
        }

        // Grasping
        let mut f_ref = cfg.reference.reference_for(tomato);
        if faults.slip {
            f_ref *= mech.slip_reference_factor;
        }
        let grasp_seed = rng.next_u64();
        let trace = cfg
            .rig
            .run_grasp(tomato, &cfg.gains, f_ref, cfg.grasp_duration, grasp_seed)?;
        let peak = trace.peak_true_force();
        let held = trace.final_true_force().unwrap_or(0.0);
        record(HarvestStage::Grasping, &mut durations);

        // Departure
        plan_trajectory(
            &arm.chain,
            &self.pick_q,
            &self.place_q,
            timing[4],
            arm.trajectory_dt,
        )?;
        record(HarvestStage::Departure, &mut durations);
        if held < min_grasp_force(tomato, mech.contacts, mech.slip_safety)? {
            return Ok(finish(
                Outcome::Fail(FailureMode::TransferSlip),
                durations,
                Some(peak),
                proximity,
            ));
        }

        // Release
        record(HarvestStage::Release, &mut durations);
        Ok(finish(Outcome::Success, durations, Some(peak), proximity))
    }

    /// `n` trials with seeds `base_seed ^ index`, run in parallel and returned in index order.
    pub fn run_campaign(
        &self,
        n: u64,
        base_seed: u64,
    ) -> Result<(CampaignSummary, Vec<TrialRecord>)> {
        if n == 0 {
            return invalid("a campaign needs at least one trial");
        }
        let records = (0..n)
            .into_par_iter()
            .map(|i| self.run_trial(i, base_seed ^ i))
            .collect::<Result<Vec<_>>>()?;
        Ok((CampaignSummary::from_records(&records), records))
    }
}

/// Convenience wrapper: build a [`Harvester`] and run a campaign.
pub fn run_campaign(
    n: u64,
    config: &HarvestConfig,
    base_seed: u64,
) -> Result<(CampaignSummary, Vec<TrialRecord>)> {
    Harvester::new(config.clone())?.run_campaign(n, base_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub n_trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// s; `None` without successes.
    pub mean_cycle_time: Option<f64>,
    /// Mean duration of each stage over successful trials, s.
    pub stage_means: BTreeMap<HarvestStage, f64>,
    pub failure_histogram: BTreeMap<FailureMode, usize>,
    pub peak_force_min: Option<f64>,
    pub peak_force_max: Option<f64>,
}

impl CampaignSummary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let successes: Vec<&TrialRecord> = records.iter().filter(|r| r.is_success()).collect();
        let n_ok = successes.len();
        let mean = |xs: &mut dyn Iterator<Item = f64>| -> Option<f64> {
            if n_ok == 0 {
                None
            } else {
                Some(xs.sum::<f64>() / n_ok as f64)
            }
        };
        let mut stage_means = BTreeMap::new();
        for stage in HarvestStage::ALL {
            if let Some(m) = mean(&mut successes.iter().filter_map(|r| r.durations[stage.index()]))
            {
                stage_means.insert(stage, m);
            }
        }
        let mut failure_histogram: BTreeMap<FailureMode, usize> =
            FailureMode::ALL.iter().map(|&m| (m, 0)).collect();
        for r in records {
            if let Some(m) = r.failure_mode() {
                *failure_histogram.entry(m).or_default() += 1;
            }
        }
        let peaks = successes.iter().filter_map(|r| r.peak_force);
        let (lo, hi) = peaks.fold((None, None), |(lo, hi): (Option<f64>, Option<f64>), p| {
            (
                Some(lo.map_or(p, |l| l.min(p))),
                Some(hi.map_or(p, |h| h.max(p))),
            )
        });
        Self {
            n_trials: records.len(),
            successes: n_ok,
            success_rate: if records.is_empty() {
                0.0
            } else {
                n_ok as f64 / records.len() as f64
            },
            mean_cycle_time: mean(&mut successes.iter().map(|r| r.total)),
            stage_means,
            failure_histogram,
            peak_force_min: lo,
            peak_force_max: hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageRow {
    pub stage: HarvestStage,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-stage duration table over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub successful_trials: usize,
    /// Empty when no trial succeeded.
    pub rows: Vec<StageRow>,
}

impl StageReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "stage,mean_s,min_s,max_s")?;
        if self.rows.is_empty() {
            writeln!(out, "# no successful trials")?;
        }
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                r.stage.name(),
                r.mean,
                r.min,
                r.max
            )?;
        }
        Ok(())
    }
}

pub fn stage_report(records: &[TrialRecord]) -> Result<StageReport> {
    if records.is_empty() {
        return invalid("stage report needs at least one record");
    }
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.is_success()).collect();
    let rows = if ok.is_empty() {
        Vec::new()
    } else {
        HarvestStage::ALL
            .iter()
            .map(|&stage| {
                let vals: Vec<f64> = ok
                    .iter()
                    .filter_map(|r| r.durations[stage.index()])
                    .collect();
                StageRow {
                    stage,
                    mean: vals.iter().sum::<f64>() / vals.len() as f64,
                    min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                    max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect()
    };
    Ok(StageReport {
        successful_trials: ok.len(),
        rows,
    })
}
