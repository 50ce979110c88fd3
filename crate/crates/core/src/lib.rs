//! Desk-scale simulation of an auxetic-finger tomato harvesting system:
//! gripper linkage and torque analysis, grasp-force control against a
//! simulated plant, arm planning, a perception stand-in and picking-cycle
//! campaigns.
//!
//! The numeric modules are generic over [`scalar::Scalar`] (`f32` or `f64`).
//! The aliases below fix the scalar to `f64`, which is what the harvest
//! orchestration, configuration and CLI use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod config;
pub mod control;
pub mod harvest;
pub mod mechanism;
pub mod perception;
pub mod plant;
pub mod scalar;

pub type Real = f64;

pub type GripperGeometry = mechanism::GripperGeometry<Real>;
pub type LinkageState = mechanism::LinkageState<Real>;
pub type ContactMap = mechanism::ContactMap<Real>;
pub type TomatoSample = plant::TomatoSample<Real>;
pub type GripperPlant = plant::GripperPlant<Real>;
pub type ReferencePolicy = plant::ReferencePolicy<Real>;
pub type PidGains = control::PidGains<Real>;
pub type GraspRig = control::GraspRig<Real>;
pub type ForceTrace = control::ForceTrace<Real>;
pub type ResponseMetrics = control::ResponseMetrics<Real>;
pub type KinematicChain = arm::KinematicChain<Real>;
pub type JointVector = arm::JointVector<Real>;
pub type Pose = arm::Pose<Real>;
pub type PsoParams = arm::PsoParams<Real>;
pub type JointTrajectory = arm::JointTrajectory<Real>;
pub type SceneObject = perception::SceneObject<Real>;
pub type Detection = perception::Detection<Real>;
pub type NoiseModel = perception::NoiseModel<Real>;
pub type DetectionMetrics = perception::DetectionMetrics<Real>;
