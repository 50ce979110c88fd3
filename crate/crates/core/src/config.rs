//! Run configuration file (TOML), validation with key paths, and run manifests.
//!
//! Mechanism and arm angles are written in degrees in the file and converted
//! to radians here.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arm::{CostWeights, DhRow, KinematicChain, Pose, PsoParams, DOF};
use crate::control::{BaseAngle, GraspRig, PidGains, PidTuning, DEFAULT_DT};
use crate::harvest::{
    ArmTask, FailureRates, FaultMechanics, HarvestConfig, HarvestPerception, StageTimingModel,
};
use crate::mechanism::{Assembly, ContactMap, GripperGeometry};
use crate::perception::{NoiseModel, SceneParams};
use crate::plant::{
    sample_table, ContactModel, FsrModel, GripperPlant, ReferencePolicy, ServoModel, TomatoSample,
};

pub const SECTIONS: [&str; 6] = [
    "geometry",
    "plant",
    "control",
    "arm",
    "perception",
    "harvest",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing config section [{0}]")]
    MissingSection(String),
    #[error("invalid value at {path}: {message}")]
    Invalid { path: String, message: String },
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

fn invalid(path: &str, err: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub l_s: f64,
    pub l_p: f64,
    pub l_dm: f64,
    pub gamma_deg: f64,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub assembly: Assembly,
    /// Crank angle at zero grasp force for the force-torque curve.
    pub contact_theta0_deg: f64,
    pub contact_deg_per_newton: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = GripperGeometry::<f64>::reference();
        let m = ContactMap::<f64>::default();
        Self {
            r: g.r,
            a: g.a,
            b: g.b,
            c: g.c,
            d: g.d,
            e: g.e,
            f: g.f,
            l_s: g.l_s,
            l_p: g.l_p,
            l_dm: g.l_dm,
            gamma_deg: g.gamma.to_degrees(),
            theta_min_deg: g.theta_min.to_degrees(),
            theta_max_deg: g.theta_max.to_degrees(),
            assembly: g.assembly,
            contact_theta0_deg: m.theta_at_zero.to_degrees(),
            contact_deg_per_newton: m.rad_per_newton.to_degrees(),
        }
    }
}

impl GeometrySection {
    pub fn geometry(&self) -> GripperGeometry<f64> {
        GripperGeometry {
            r: self.r,
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            e: self.e,
            f: self.f,
            l_s: self.l_s,
            l_p: self.l_p,
            l_dm: self.l_dm,
            gamma: self.gamma_deg.to_radians(),
            theta_min: self.theta_min_deg.to_radians(),
            theta_max: self.theta_max_deg.to_radians(),
            assembly: self.assembly,
        }
    }

    pub fn contact_map(&self) -> ContactMap<f64> {
        ContactMap {
            theta_at_zero: self.contact_theta0_deg.to_radians(),
            rad_per_newton: self.contact_deg_per_newton.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub tomatoes: Vec<TomatoSample<f64>>,
    pub servo: ServoModel<f64>,
    pub fsr: FsrModel<f64>,
    pub contact: ContactModel<f64>,
    pub sensor_count: usize,
    /// Servo angle with the fingers fully open, degrees.
    pub open_angle: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = GripperPlant::<f64>::default();
        Self {
            tomatoes: sample_table(),
            servo: p.servo,
            fsr: p.fsr,
            contact: p.contact,
            sensor_count: p.sensor_count,
            open_angle: p.open_angle,
        }
    }
}

impl PlantSection {
    pub fn plant(&self) -> GripperPlant<f64> {
        GripperPlant {
            servo: self.servo,
            fsr: self.fsr,
            contact: self.contact,
            sensor_count: self.sensor_count,
            open_angle: self.open_angle,
        }
    }

    pub fn tomato(&self, id: &str) -> Option<&TomatoSample<f64>> {
        self.tomatoes.iter().find(|t| t.id.eq_ignore_ascii_case(id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub gains: PidGains<f64>,
    /// s
    pub dt: f64,
    pub reference: ReferencePolicy<f64>,
    pub tuning: PidTuning<f64>,
    pub output_scale: f64,
    pub base: BaseAngle<f64>,
    /// Default grasp run length, s.
    pub duration: f64,
    /// Tomato used by `grasp` and `tune` when none is given.
    pub nominal_tomato: String,
}

impl Default for ControlSection {
    fn default() -> Self {
        let rig = GraspRig::<f64>::default();
        Self {
            gains: PidGains::nominal(),
            dt: DEFAULT_DT,
            reference: ReferencePolicy::mass_scaled_default(),
            tuning: rig.tuning,
            output_scale: rig.output_scale,
            base: rig.base,
            duration: 5.0,
            nominal_tomato: "F3".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRowDeg {
    pub a: f64,
    pub alpha_deg: f64,
    pub d: f64,
    pub offset_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSection {
    pub particle_count: usize,
    pub iteration_count: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp: f64,
    pub stall_iterations: usize,
    pub restart_threshold: f64,
    pub convergence_threshold: f64,
}

impl Default for PsoSection {
    fn default() -> Self {
        let p = PsoParams::<f64>::default();
        Self {
            particle_count: p.particle_count,
            iteration_count: p.iteration_count,
            inertia: p.inertia,
            cognitive: p.cognitive,
            social: p.social,
            velocity_clamp: p.velocity_clamp,
            stall_iterations: p.stall_iterations,
            restart_threshold: p.restart_threshold,
            convergence_threshold: p.convergence_threshold,
        }
    }
}

impl PsoSection {
    pub fn params(&self, seed: u64) -> PsoParams<f64> {
        PsoParams {
            particle_count: self.particle_count,
            iteration_count: self.iteration_count,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            seed,
            velocity_clamp: self.velocity_clamp,
            stall_iterations: self.stall_iterations,
            restart_threshold: self.restart_threshold,
            convergence_threshold: self.convergence_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmSection {
    pub joints: [DhRowDeg; DOF],
    pub limits_low_deg: [f64; DOF],
    pub limits_high_deg: [f64; DOF],
    pub velocity_limits_deg_s: [f64; DOF],
    pub pso: PsoSection,
    /// mm per radian of approach misalignment.
    pub weight_dir: f64,
    pub weight_limit: f64,
    /// Trajectory sampling period, s.
    pub trajectory_dt: f64,
    /// Default `plan` move duration, s.
    pub move_duration: f64,
    pub home_deg: [f64; DOF],
}

impl Default for ArmSection {
    fn default() -> Self {
        let c = KinematicChain::<f64>::default();
        let w = CostWeights::<f64>::default();
        Self {
            joints: c.joints.map(|r| DhRowDeg {
                a: r.a,
                alpha_deg: r.alpha.to_degrees(),
                d: r.d,
                offset_deg: r.offset.to_degrees(),
            }),
            limits_low_deg: c.limits_low.map(f64::to_degrees),
            limits_high_deg: c.limits_high.map(f64::to_degrees),
            velocity_limits_deg_s: c.velocity_limits.map(f64::to_degrees),
            pso: PsoSection::default(),
            weight_dir: w.direction,
            weight_limit: w.limit,
            trajectory_dt: 0.05,
            move_duration: 4.0,
            home_deg: [0.0; DOF],
        }
    }
}

impl ArmSection {
    pub fn chain(&self) -> KinematicChain<f64> {
        KinematicChain {
            joints: self.joints.map(|r| {
                DhRow::new(
                    r.a,
                    r.alpha_deg.to_radians(),
                    r.d,
                    r.offset_deg.to_radians(),
                )
            }),
            limits_low: self.limits_low_deg.map(f64::to_radians),
            limits_high: self.limits_high_deg.map(f64::to_radians),
            velocity_limits: self.velocity_limits_deg_s.map(f64::to_radians),
        }
    }

    pub fn weights(&self) -> CostWeights<f64> {
        CostWeights {
            direction: self.weight_dir,
            limit: self.weight_limit,
            ..CostWeights::default()
        }
    }

    pub fn home(&self) -> [f64; DOF] {
        self.home_deg.map(f64::to_radians)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionSection {
    pub noise: NoiseModel<f64>,
    pub scene: SceneParams<f64>,
    pub tomatoes_per_scene: usize,
    pub iou_threshold: f64,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        Self {
            noise: NoiseModel::zero(),
            scene: SceneParams::default(),
            tomatoes_per_scene: 5,
            iou_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    /// mm
    pub position: [f64; 3],
    pub approach: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarvestSection {
    pub timing: StageTimingModel,
    pub failure: FailureRates,
    pub mechanics: FaultMechanics,
    pub perception: HarvestPerception,
    /// Simulated grasp length per trial, s.
    pub grasp_duration: f64,
    pub pick: PoseSection,
    pub place: PoseSection,
    /// mm per rad^2 distance from the home posture when solving pick/place goals.
    pub posture_weight: f64,
    /// Direction weight used for the pick/place goals, mm/rad.
    pub goal_weight_dir: f64,
    /// Largest accepted goal position error, mm.
    pub goal_tolerance: f64,
    /// Tomato ids drawn per trial; empty means the whole plant table.
    pub tomatoes: Vec<String>,
}

impl Default for HarvestSection {
    fn default() -> Self {
        let task = ArmTask::default();
        Self {
            timing: StageTimingModel::default(),
            failure: FailureRates::default(),
            mechanics: FaultMechanics::default(),
            perception: HarvestPerception::default(),
            grasp_duration: 5.0,
            pick: PoseSection {
                position: task.pick.position,
                approach: task.pick.approach,
            },
            place: PoseSection {
                position: task.place.position,
                approach: task.place.approach,
            },
            posture_weight: task.weights.posture,
            goal_weight_dir: task.weights.direction,
            goal_tolerance: task.goal_tolerance,
            tomatoes: Vec::new(),
        }
    }
}

/// Complete configuration; every section must be present in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometrySection,
    pub plant: PlantSection,
    pub control: ControlSection,
    pub arm: ArmSection,
    pub perception: PerceptionSection,
    pub harvest: HarvestSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for section in SECTIONS {
            if !table.contains_key(section) {
                return Err(ConfigError::MissingSection(section.to_string()));
            }
        }
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn grasp_rig(&self) -> GraspRig<f64> {
        GraspRig {
            plant: self.plant.plant(),
            tuning: self.control.tuning,
            output_scale: self.control.output_scale,
            base: self.control.base,
            dt: self.control.dt,
        }
    }

    pub fn harvest_config(&self) -> Result<HarvestConfig> {
        let h = &self.harvest;
        let tomatoes = if h.tomatoes.is_empty() {
            self.plant.tomatoes.clone()
        } else {
            h.tomatoes
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    self.plant.tomato(id).cloned().ok_or_else(|| {
                        invalid(
                            &format!("harvest.tomatoes[{i}]"),
                            format!("unknown tomato id {id:?}"),
                        )
                    })
                })
                .collect::<Result<_>>()?
        };
        let pose = |p: &PoseSection, path: &str| {
            Pose::new(p.position, p.approach).map_err(|e| invalid(path, e))
        };
        let home = self.arm.home();
        Ok(HarvestConfig {
            timing: h.timing,
            failure: h.failure,
            mechanics: h.mechanics,
            perception: h.perception,
            rig: self.grasp_rig(),
            gains: self.control.gains,
            reference: self.control.reference,
            grasp_duration: h.grasp_duration,
            arm: ArmTask {
                chain: self.arm.chain(),
                pso: self.arm.pso.params(self.seed),
                weights: CostWeights {
                    direction: h.goal_weight_dir,
                    limit: self.arm.weight_limit,
                    posture: h.posture_weight,
                    rest: home,
                },
                home,
                pick: pose(&h.pick, "harvest.pick")?,
                place: pose(&h.place, "harvest.place")?,
                trajectory_dt: self.arm.trajectory_dt,
                goal_tolerance: h.goal_tolerance,
            },
            tomatoes,
        })
    }

    /// Checks every section; the error names the offending key path.
    pub fn validate(&self) -> Result<()> {
        let geom = self.geometry.geometry();
        geom.validate().map_err(|e| invalid("geometry", e))?;
        let map = self.geometry.contact_map();
        if !(map.rad_per_newton >= 0.0) || !geom.in_range(map.theta_at_zero) {
            return Err(invalid(
                "geometry.contact_theta0_deg",
                "contact map must start inside the crank range with a non-negative slope",
            ));
        }

        if self.plant.tomatoes.is_empty() {
            return Err(invalid(
                "plant.tomatoes",
                "at least one tomato sample is required",
            ));
        }
        for (i, t) in self.plant.tomatoes.iter().enumerate() {
            t.validate()
                .map_err(|e| invalid(&format!("plant.tomatoes[{i}]"), e))?;
        }
        self.plant
            .servo
            .validate()
            .map_err(|e| invalid("plant.servo", e))?;
        self.plant
            .fsr
            .validate()
            .map_err(|e| invalid("plant.fsr", e))?;
        self.plant
            .contact
            .validate()
            .map_err(|e| invalid("plant.contact", e))?;
        self.plant
            .plant()
            .validate()
            .map_err(|e| invalid("plant", e))?;

        self.control
            .gains
            .validate()
            .map_err(|e| invalid("control.gains", e))?;
        if !(self.control.dt > 0.0) {
            return Err(invalid("control.dt", "must be positive"));
        }
        if !(self.control.duration > 0.0) {
            return Err(invalid("control.duration", "must be positive"));
        }
        self.control
            .reference
            .validate()
            .map_err(|e| invalid("control.reference", e))?;
        self.control
            .tuning
            .validate()
            .map_err(|e| invalid("control.tuning", e))?;
        if !(self.control.output_scale > 0.0) {
            return Err(invalid("control.output_scale", "must be positive"));
        }
        if self.plant.tomato(&self.control.nominal_tomato).is_none() {
            return Err(invalid("control.nominal_tomato", "not in plant.tomatoes"));
        }

        self.arm.chain().validate().map_err(|e| invalid("arm", e))?;
        self.arm
            .pso
            .params(self.seed)
            .validate()
            .map_err(|e| invalid("arm.pso", e))?;
        if !(self.arm.weight_dir >= 0.0 && self.arm.weight_limit >= 0.0) {
            return Err(invalid("arm.weight_dir", "weights must be non-negative"));
        }
        if !(self.arm.trajectory_dt > 0.0 && self.arm.move_duration > 0.0) {
            return Err(invalid(
                "arm.trajectory_dt",
                "trajectory_dt and move_duration must be positive",
            ));
        }
        if !self.arm.chain().is_feasible(&self.arm.home()) {
            return Err(invalid("arm.home_deg", "outside the joint limits"));
        }

        self.perception
            .noise
            .validate()
            .map_err(|e| invalid("perception.noise", e))?;
        self.perception
            .scene
            .validate()
            .map_err(|e| invalid("perception.scene", e))?;
        if self.perception.tomatoes_per_scene == 0 {
            return Err(invalid(
                "perception.tomatoes_per_scene",
                "must be at least 1",
            ));
        }
        if !(self.perception.iou_threshold > 0.0 && self.perception.iou_threshold < 1.0) {
            return Err(invalid("perception.iou_threshold", "must lie in (0, 1)"));
        }

        self.harvest_config()?
            .validate()
            .map_err(|e| invalid("harvest", e))?;
        Ok(())
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seed: Option<u64>, outputs: Vec<String>) -> Self {
        Self {
            tool: "auxgrip".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            seed,
            outputs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn degree_boundary_converts() {
        let cfg = RunConfig::default();
        let g = cfg.geometry.geometry();
        assert!((g.gamma - 0.35).abs() < 1e-12);
        let chain = cfg.arm.chain();
        let reference = KinematicChain::<f64>::default();
        for j in 0..DOF {
            assert!((chain.joints[j].alpha - reference.joints[j].alpha).abs() < 1e-12);
            assert!((chain.joints[j].offset - reference.joints[j].offset).abs() < 1e-12);
            assert!((chain.limits_low[j] - reference.limits_low[j]).abs() < 1e-12);
            assert!((chain.limits_high[j] - reference.limits_high[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_section_is_named() {
        let mut text = RunConfig::default().to_toml_string();
        let start = text.find("[harvest").unwrap();
        text.truncate(start);
        match RunConfig::from_toml_str(&text) {
            Err(ConfigError::MissingSection(s)) => assert_eq!(s, "harvest"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sections_default_missing_keys_and_reject_unknown() {
        let minimal = "[geometry]\n[plant]\n[control]\n[arm]\n[perception]\n[harvest]\n";
        assert_eq!(
            RunConfig::from_toml_str(minimal).unwrap(),
            RunConfig::default()
        );
        let bad = "[geometry]\nbogus = 1\n[plant]\n[control]\n[arm]\n[perception]\n[harvest]\n";
        assert!(matches!(
            RunConfig::from_toml_str(bad),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn invalid_value_reports_path() {
        let mut cfg = RunConfig::default();
        cfg.control.gains.kp = -1.0;
        match cfg.validate() {
            Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, "control.gains"),
            other => panic!("unexpected {other:?}"),
        }
        let mut cfg = RunConfig::default();
        cfg.harvest.tomatoes = vec!["F9".into()];
        match cfg.validate() {
            Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, "harvest.tomatoes[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
