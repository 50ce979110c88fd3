//! Behavioral model of the grasped tomato, the gripper servo and the FSR chain.
//!
//! The servo angle closes the finger aperture linearly; once the aperture
//! reaches the tomato diameter the contact behaves as a linear spring. Each FSR
//! strip saturates, adds Gaussian noise, and is quantized through the ADC with
//! its calibration map.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid tomato sample {id}: {reason}")]
    InvalidTomato { id: String, reason: String },
    #[error("invalid servo model: {0}")]
    InvalidServo(String),
    #[error("invalid FSR model: {0}")]
    InvalidFsr(String),
    #[error("invalid contact model: {0}")]
    InvalidContact(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = PlantError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomatoSample<T> {
    pub id: String,
    /// grams
    pub mass: T,
    /// mm
    pub diameter: T,
    /// N/mm
    pub stiffness: T,
    pub friction_mu: T,
}

impl<T: Scalar> TomatoSample<T> {
    pub fn new(
        id: impl Into<String>,
        mass: T,
        diameter: T,
        stiffness: T,
        friction_mu: T,
    ) -> Result<Self> {
        let sample = Self {
            id: id.into(),
            mass,
            diameter,
            stiffness,
            friction_mu,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(PlantError::InvalidTomato {
                id: self.id.clone(),
                reason,
            })
        };
        if !(self.mass > T::zero()) {
            return fail(format!("mass must be positive, got {} g", self.mass));
        }
        if !(self.diameter >= lit(30.0) && self.diameter <= lit(80.0)) {
            return fail(format!("diameter {} mm outside [30, 80] mm", self.diameter));
        }
        if !(self.stiffness > T::zero()) {
            return fail(format!(
                "stiffness must be positive, got {}",
                self.stiffness
            ));
        }
        if !(self.friction_mu > T::zero() && self.friction_mu < lit(2.0)) {
            return fail(format!(
                "friction coefficient {} outside (0, 2)",
                self.friction_mu
            ));
        }
        Ok(())
    }

    pub fn mass_kg(&self) -> T {
        self.mass / lit(1000.0)
    }

    pub fn weight(&self) -> T {
        self.mass_kg() * lit(GRAVITY)
    }
}

/// The five graded samples F1..F5 (mass g, diameter mm) with shared stiffness and friction.
pub fn sample_table<T: Scalar>() -> Vec<TomatoSample<T>> {
    [
        ("F1", 81.0, 57.0),
        ("F2", 72.0, 54.0),
        ("F3", 76.0, 55.0),
        ("F4", 50.0, 48.0),
        ("F5", 40.0, 43.0),
    ]
    .into_iter()
    .map(|(id, mass, diameter)| TomatoSample {
        id: id.to_string(),
        mass: lit(mass),
        diameter: lit(diameter),
        stiffness: lit(0.3),
        friction_mu: lit(0.8),
    })
    .collect()
}

/// Looks up a sample by id in the default table.
pub fn sample_by_id<T: Scalar>(id: &str) -> Option<TomatoSample<T>> {
    sample_table()
        .into_iter()
        .find(|s| s.id.eq_ignore_ascii_case(id))
}

/// Hobby servo: range-limited, slew-limited first-order lag toward the command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoModel<T> {
    /// degrees
    pub angle_min: T,
    pub angle_max: T,
    /// degrees per second
    pub max_rate: T,
    /// seconds
    pub time_constant: T,
}

impl<T: Scalar> Default for ServoModel<T> {
    fn default() -> Self {
        Self {
            angle_min: T::zero(),
            angle_max: lit(180.0),
            max_rate: lit(60.0),
            time_constant: lit(0.6),
        }
    }
}

impl<T: Scalar> ServoModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_min >= T::zero()
            && self.angle_max <= lit(180.0)
            && self.angle_min < self.angle_max)
        {
            return Err(PlantError::InvalidServo(format!(
                "angle range [{}, {}] must satisfy 0 <= min < max <= 180",
                self.angle_min, self.angle_max
            )));
        }
        if !(self.max_rate > T::zero()) {
            return Err(PlantError::InvalidServo("max_rate must be positive".into()));
        }
        if !(self.time_constant >= T::zero()) {
            return Err(PlantError::InvalidServo(
                "time_constant must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn clamp(&self, angle: T) -> T {
        angle.max(self.angle_min).min(self.angle_max)
    }
}

/// Force-sensitive resistor strip behind a voltage divider and ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsrModel<T> {
    /// Saturation force, N.
    pub force_max: T,
    pub adc_bits: u32,
    /// Per-strip noise standard deviation, N.
    pub noise_sigma: T,
    /// counts per newton
    pub cal_gain: T,
    /// counts at zero force
    pub cal_offset: T,
}

impl<T: Scalar> FsrModel<T> {
    /// Calibration spanning the full ADC range over `[0, force_max]`.
    pub fn new(force_max: T, adc_bits: u32, noise_sigma: T) -> Self {
        let full_scale = T::from_u32((1u32 << adc_bits) - 1).unwrap();
        Self {
            force_max,
            adc_bits,
            noise_sigma,
            cal_gain: full_scale / force_max,
            cal_offset: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.force_max > T::zero()) {
            return Err(PlantError::InvalidFsr("force_max must be positive".into()));
        }
        if ![8, 10, 12].contains(&self.adc_bits) {
            return Err(PlantError::InvalidFsr(format!(
                "adc_bits must be 8, 10 or 12, got {}",
                self.adc_bits
            )));
        }
        if !(self.noise_sigma >= T::zero()) {
            return Err(PlantError::InvalidFsr(
                "noise_sigma must be non-negative".into(),
            ));
        }
        if !(self.cal_gain > T::zero()) {
            return Err(PlantError::InvalidFsr("cal_gain must be positive".into()));
        }
        Ok(())
    }

    fn full_scale(&self) -> T {
        T::from_u32((1u32 << self.adc_bits) - 1).unwrap()
    }

    /// Force represented by one ADC count, N.
    pub fn resolution(&self) -> T {
        T::one() / self.cal_gain
    }
}

impl<T: Scalar> Default for FsrModel<T> {
    fn default() -> Self {
        Self::new(lit(2.0), 10, lit(0.003))
    }
}

/// Aperture-based contact law.
///
/// The aperture shrinks by `travel_per_degree` mm per servo degree from
/// `open_aperture` at 0 deg. Contact starts where the aperture equals the
/// tomato diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactModel<T> {
    /// mm
    pub open_aperture: T,
    /// mm per degree
    pub travel_per_degree: T,
    /// Physical force limit, N.
    pub force_cap: T,
}

impl<T: Scalar> Default for ContactModel<T> {
    fn default() -> Self {
        Self {
            open_aperture: lit(80.0),
            travel_per_degree: lit(0.3),
            force_cap: lit(5.0),
        }
    }
}

impl<T: Scalar> ContactModel<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.open_aperture > T::zero()
            && self.travel_per_degree > T::zero()
            && self.force_cap > T::zero())
        {
            return Err(PlantError::InvalidContact(
                "open_aperture, travel_per_degree and force_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Servo angle at which the fingers first touch a fruit of `diameter` mm.
    pub fn contact_angle(&self, diameter: T) -> T {
        (self.open_aperture - diameter) / self.travel_per_degree
    }

    /// Force gradient past contact, N per degree.
    pub fn effective_stiffness(&self, tomato: &TomatoSample<T>) -> T {
        tomato.stiffness * self.travel_per_degree
    }
}

/// Grasp force for a servo angle: zero before engagement, linear after, capped.
pub fn contact_force<T: Scalar>(
    contact: &ContactModel<T>,
    tomato: &TomatoSample<T>,
    servo_angle: T,
) -> T {
    let penetration = (servo_angle - contact.contact_angle(tomato.diameter)).max(T::zero());
    (contact.effective_stiffness(tomato) * penetration).min(contact.force_cap)
}

/// One calibrated reading from a single FSR strip.
pub fn fsr_read<T: Scalar, R: Rng + ?Sized>(fsr: &FsrModel<T>, true_force: T, rng: &mut R) -> T {
    let saturated = true_force.max(T::zero()).min(fsr.force_max);
    let noisy = T::sample_normal(rng, saturated, fsr.noise_sigma);
    let counts = (fsr.cal_offset + fsr.cal_gain * noisy)
        .round()
        .max(T::zero())
        .min(fsr.full_scale());
    (counts - fsr.cal_offset) / fsr.cal_gain
}

/// Mean of `sensors` independent strip readings of the same force.
pub fn fsr_mean<T: Scalar, R: Rng + ?Sized>(
    fsr: &FsrModel<T>,
    true_force: T,
    sensors: usize,
    rng: &mut R,
) -> T {
    let n = sensors.max(1);
    let sum = (0..n).fold(T::zero(), |acc, _| acc + fsr_read(fsr, true_force, rng));
    sum / T::from_usize(n).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState<T> {
    /// degrees
    pub servo_angle: T,
    /// N
    pub true_force: T,
    /// s
    pub time: T,
}

impl<T: Scalar> PlantState<T> {
    pub fn at_rest(servo_angle: T) -> Self {
        Self {
            servo_angle,
            true_force: T::zero(),
            time: T::zero(),
        }
    }
}

/// Servo, contact law and sensing chain for one gripper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperPlant<T> {
    pub servo: ServoModel<T>,
    pub fsr: FsrModel<T>,
    pub contact: ContactModel<T>,
    /// Instrumented strips averaged into one measurement.
    pub sensor_count: usize,
    /// Servo angle before closing, degrees.
    pub open_angle: T,
}

impl<T: Scalar> Default for GripperPlant<T> {
    fn default() -> Self {
        Self {
            servo: ServoModel::default(),
            fsr: FsrModel::default(),
            contact: ContactModel::default(),
            sensor_count: 3,
            open_angle: T::zero(),
        }
    }
}

impl<T: Scalar> GripperPlant<T> {
    pub fn validate(&self) -> Result<()> {
        self.servo.validate()?;
        self.fsr.validate()?;
        self.contact.validate()?;
        if self.sensor_count == 0 {
            return Err(PlantError::InvalidArgument(
                "sensor_count must be at least 1".into(),
            ));
        }
        if self.servo.clamp(self.open_angle) != self.open_angle {
            return Err(PlantError::InvalidArgument(
                "open_angle outside servo range".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self, tomato: &TomatoSample<T>) -> PlantState<T> {
        PlantState {
            servo_angle: self.open_angle,
            true_force: contact_force(&self.contact, tomato, self.open_angle),
            time: T::zero(),
        }
    }

    /// Averaged FSR measurement of the current contact force.
    pub fn measure<R: Rng + ?Sized>(&self, state: &PlantState<T>, rng: &mut R) -> T {
        fsr_mean(&self.fsr, state.true_force, self.sensor_count, rng)
    }

    pub fn step(
        &self,
        state: &PlantState<T>,
        command_angle: T,
        dt: T,
        tomato: &TomatoSample<T>,
    ) -> PlantState<T> {
        step(state, command_angle, dt, &self.servo, &self.contact, tomato)
    }
}

/// Advances the servo by `dt` toward `command_angle` and updates the contact force.
pub fn step<T: Scalar>(
    state: &PlantState<T>,
    command_angle: T,
    dt: T,
    servo: &ServoModel<T>,
    contact: &ContactModel<T>,
    tomato: &TomatoSample<T>,
) -> PlantState<T> {
    let target = servo.clamp(command_angle);
    let blend = if servo.time_constant > T::zero() {
        T::one() - (-dt / servo.time_constant).exp()
    } else {
        T::one()
    };
    let max_delta = servo.max_rate * dt;
    let delta = (blend * (target - state.servo_angle))
        .max(-max_delta)
        .min(max_delta);
    let servo_angle = servo.clamp(state.servo_angle + delta);
    PlantState {
        servo_angle,
        true_force: contact_force(contact, tomato, servo_angle),
        time: state.time + dt,
    }
}

/// How the grasp-force setpoint is chosen for a tomato.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferencePolicy<T> {
    /// Same setpoint for every fruit, N.
    Fixed { force: T },
    /// `clamp(gain * weight, min, max)`.
    MassScaled { gain: T, min: T, max: T },
}

impl<T: Scalar> ReferencePolicy<T> {
    pub fn fixed_default() -> Self {
        ReferencePolicy::Fixed { force: lit(0.30) }
    }

    pub fn mass_scaled_default() -> Self {
        ReferencePolicy::MassScaled {
            gain: lit(0.60),
            min: lit(0.20),
            max: lit(0.50),
        }
    }

    pub fn reference_for(&self, tomato: &TomatoSample<T>) -> T {
        match *self {
            ReferencePolicy::Fixed { force } => force,
            ReferencePolicy::MassScaled { gain, min, max } => {
                (gain * tomato.weight()).max(min).min(max)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferencePolicy::Fixed { force } if !(force >= T::zero()) => Err(
                PlantError::InvalidArgument("fixed reference must be non-negative".into()),
            ),
            ReferencePolicy::MassScaled { gain, min, max }
                if !(gain > T::zero() && min >= T::zero() && min <= max) =>
            {
                Err(PlantError::InvalidArgument(
                    "mass-scaled reference needs gain > 0 and 0 <= min <= max".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Mass-scaled setpoint with the default fit: `clamp(0.60 * m g, 0.20, 0.50)` N.
pub fn reference_force<T: Scalar>(tomato: &TomatoSample<T>) -> T {
    ReferencePolicy::mass_scaled_default().reference_for(tomato)
}

/// Smallest normal force that keeps the fruit from slipping out of
/// `n_contacts` frictional contacts, scaled by `safety`.
pub fn min_grasp_force<T: Scalar>(
    tomato: &TomatoSample<T>,
    n_contacts: u32,
    safety: T,
) -> Result<T> {
    if n_contacts == 0 {
        return Err(PlantError::InvalidArgument(
            "n_contacts must be at least 1".into(),
        ));
    }
    if !(safety >= T::one()) {
        return Err(PlantError::InvalidArgument(format!(
            "safety factor {safety} below 1"
        )));
    }
    Ok(safety * tomato.weight() / (tomato.friction_mu * T::from_u32(n_contacts).unwrap()))
}
