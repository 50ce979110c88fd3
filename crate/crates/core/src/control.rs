//! Grasp-force regulation: discrete PID with anti-windup, the closed grasp
//! loop against the simulated gripper, response metrics, and a
//! Ziegler-Nichols style autotuner.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{GripperPlant, PlantError, PlantState, TomatoSample};
use crate::scalar::{lit, Scalar};

/// Half-width of the settling band, N.
pub const SETTLE_BAND: f64 = 0.02;

/// Fraction of the trace, counted from the end, used for steady-state deviation.
pub const STEADY_TAIL: f64 = 0.3;

/// Default loop period, s.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("no sustained oscillation found up to kp = {max_kp}")]
    NoOscillationFound { max_kp: f64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("csv output failed: {0}")]
    Io(String),
}

pub type Result<T, E = ControlError> = std::result::Result<T, E>;

/// Controller gains in degrees of servo command per newton of force error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
}

impl<T: Scalar> PidGains<T> {
    pub fn new(kp: T, ki: T, kd: T) -> Self {
        Self { kp, ki, kd }
    }

    /// Bench-validated gains: kp 0.15 deg/N, ki 0.02 deg/(N s), kd 0.001 deg s/N.
    pub fn nominal() -> Self {
        Self::new(lit(0.15), lit(0.02), lit(0.001))
    }

    pub fn proportional(kp: T) -> Self {
        Self::new(kp, T::zero(), T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= T::zero() && self.ki >= T::zero() && self.kd >= T::zero()) {
            return Err(ControlError::InvalidArgument(format!(
                "gains must be non-negative, got ({}, {}, {})",
                self.kp, self.ki, self.kd
            )));
        }
        Ok(())
    }
}

/// Maps the raw PID sum to a servo command: `clamp(base + scale * raw, min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputMap<T> {
    pub base: T,
    pub scale: T,
    pub min: T,
    pub max: T,
}

impl<T: Scalar> OutputMap<T> {
    pub fn new(base: T, scale: T) -> Self {
        Self {
            base,
            scale,
            min: T::zero(),
            max: lit(180.0),
        }
    }

    pub fn apply(&self, raw: T) -> (T, bool) {
        let unclamped = self.base + self.scale * raw;
        let clamped = unclamped.max(self.min).min(self.max);
        (clamped, clamped != unclamped)
    }
}

/// Anti-windup and derivative filtering settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidTuning<T> {
    /// Symmetric clamp on the error integral, N s.
    pub integral_limit: T,
    /// The integral only accumulates while `|e|` is within this band, N.
    pub integral_band: T,
    /// Weight of the newest raw derivative in the exponential filter; 1 disables filtering.
    pub derivative_filter: T,
}

impl<T: Scalar> Default for PidTuning<T> {
    fn default() -> Self {
        Self {
            integral_limit: T::one(),
            integral_band: lit(0.1),
            derivative_filter: lit(0.1),
        }
    }
}

impl<T: Scalar> PidTuning<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.integral_limit >= T::zero()) {
            return Err(ControlError::InvalidArgument(
                "integral_limit must be non-negative".into(),
            ));
        }
        if !(self.integral_band >= T::zero()) {
            return Err(ControlError::InvalidArgument(
                "integral_band must be non-negative".into(),
            ));
        }
        if !(self.derivative_filter > T::zero() && self.derivative_filter <= T::one()) {
            return Err(ControlError::InvalidArgument(
                "derivative_filter must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState<T> {
    /// N s
    pub integral: T,
    /// N
    pub prev_error: T,
    /// degrees
    pub prev_command: T,
    /// Filtered error derivative, N/s.
    pub derivative: T,
    /// False until the first sample has been seen; the first step has no derivative.
    pub primed: bool,
}

impl<T: Scalar> ControllerState<T> {
    pub fn new(initial_command: T) -> Self {
        Self {
            prev_command: initial_command,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidController<T> {
    pub gains: PidGains<T>,
    pub tuning: PidTuning<T>,
    pub output: OutputMap<T>,
}

impl<T: Scalar> PidController<T> {
    pub fn new(gains: PidGains<T>, tuning: PidTuning<T>, output: OutputMap<T>) -> Self {
        Self {
            gains,
            tuning,
            output,
        }
    }

    pub fn step(
        &self,
        state: &ControllerState<T>,
        f_ref: T,
        f_meas: T,
        dt: T,
    ) -> (T, ControllerState<T>) {
        pid_step(self, state, f_ref, f_meas, dt)
    }
}

/// One controller update. Returns the servo command in degrees and the new state.
pub fn pid_step<T: Scalar>(
    controller: &PidController<T>,
    state: &ControllerState<T>,
    f_ref: T,
    f_meas: T,
    dt: T,
) -> (T, ControllerState<T>) {
    let PidGains { kp, ki, kd } = controller.gains;
    let tuning = &controller.tuning;
    let error = f_ref - f_meas;

    let raw_derivative = if state.primed {
        (error - state.prev_error) / dt
    } else {
        T::zero()
    };
    let derivative = if state.primed {
        state.derivative + tuning.derivative_filter * (raw_derivative - state.derivative)
    } else {
        T::zero()
    };

    // Conditional integration: skip while far from the setpoint, and skip when
    // the previous command was pinned at a limit and the error pushes further into it.
    let pushing_into_limit = (state.prev_command >= controller.output.max && error > T::zero())
        || (state.prev_command <= controller.output.min && error < T::zero());
    let integral = if error.abs() <= tuning.integral_band && !(state.primed && pushing_into_limit) {
        (state.integral + error * dt)
            .max(-tuning.integral_limit)
            .min(tuning.integral_limit)
    } else {
        state.integral
    };

    let raw = kp * error + ki * integral + kd * derivative;
    let (command, _) = controller.output.apply(raw);
    (
        command,
        ControllerState {
            integral,
            prev_error: error,
            prev_command: command,
            derivative,
            primed: true,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample<T> {
    /// s
    pub time: T,
    /// N
    pub reference: T,
    /// Sensor-averaged force, N.
    pub measured: T,
    /// Plant contact force, N.
    pub true_force: T,
    /// Servo command, degrees.
    pub command: T,
    /// Actual servo angle, degrees.
    pub servo_angle: T,
}

/// Uniformly sampled record of a force-control run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace<T> {
    pub dt: T,
    pub samples: Vec<TraceSample<T>>,
}

impl<T: Scalar> ForceTrace<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak_true_force(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |m, s| m.max(s.true_force))
    }

    pub fn final_true_force(&self) -> Option<T> {
        self.samples.last().map(|s| s.true_force)
    }

    /// Mean measured force over the final 30 % of the trace; zero when empty.
    pub fn tail_mean_measured(&self) -> T {
        let n = self.samples.len();
        if n == 0 {
            return T::zero();
        }
        let start = n - ((n as f64 * STEADY_TAIL).ceil() as usize).clamp(1, n);
        let tail = &self.samples[start..];
        tail.iter().fold(T::zero(), |a, s| a + s.measured) / lit::<T>(tail.len() as f64)
    }

    /// Writes `time_s,f_ref_N,f_meas_N,f_true_N,servo_deg`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,f_ref_N,f_meas_N,f_true_N,servo_deg")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.4},{:.6},{:.6},{:.6},{:.4}",
                s.time.to_f64().unwrap(),
                s.reference.to_f64().unwrap(),
                s.measured.to_f64().unwrap(),
                s.true_force.to_f64().unwrap(),
                s.servo_angle.to_f64().unwrap()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseMetrics<T> {
    /// Time of the first sample after which the error never leaves the band; `None` if never.
    pub settle_time: Option<T>,
    /// Peak measured overshoot as a fraction of the final reference.
    pub overshoot: T,
    /// Largest `|error|` over the final 30 % of the trace, N.
    pub steady_state_dev: T,
}

/// Settling time, overshoot and steady-state deviation of a trace.
pub fn response_metrics<T: Scalar>(trace: &ForceTrace<T>) -> Result<ResponseMetrics<T>> {
    let samples = &trace.samples;
    let last = samples.last().ok_or(ControlError::EmptyTrace)?;
    let band = lit::<T>(SETTLE_BAND);

    let mut settle_index = None;
    for (i, s) in samples.iter().enumerate().rev() {
        if (s.reference - s.measured).abs() <= band {
            settle_index = Some(i);
        } else {
            break;
        }
    }
    let settle_time = settle_index.map(|i| samples[i].time - samples[0].time);

    let reference = last.reference;
    let peak = samples
        .iter()
        .fold(T::neg_infinity(), |m, s| m.max(s.measured));
    let overshoot = if reference > T::zero() {
        ((peak - reference) / reference).max(T::zero())
    } else {
        T::zero()
    };

    let n = samples.len();
    let tail_len = ((lit::<T>(STEADY_TAIL) * T::from_usize(n).unwrap())
        .ceil()
        .to_usize()
        .unwrap())
    .clamp(1, n);
    let steady_state_dev = samples[n - tail_len..]
        .iter()
        .fold(T::zero(), |m, s| m.max((s.reference - s.measured).abs()));

    Ok(ResponseMetrics {
        settle_time,
        overshoot,
        steady_state_dev,
    })
}

/// Anything that can close a force loop: report a measurement, accept a command.
pub trait ForceLoopPlant<T: Scalar> {
    fn measure(&mut self) -> T;
    fn true_force(&self) -> T;
    fn servo_angle(&self) -> T;
    fn apply(&mut self, command: T, dt: T);
}

/// The simulated gripper holding one tomato, with its own seeded noise source.
#[derive(Debug, Clone)]
pub struct SimulatedGrasp<T> {
    pub plant: GripperPlant<T>,
    pub tomato: TomatoSample<T>,
    pub state: PlantState<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> SimulatedGrasp<T> {
    pub fn new(plant: GripperPlant<T>, tomato: TomatoSample<T>, seed: u64) -> Self {
        let state = plant.initial_state(&tomato);
        Self {
            plant,
            tomato,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<T: Scalar> ForceLoopPlant<T> for SimulatedGrasp<T> {
    fn measure(&mut self) -> T {
        self.plant.measure(&self.state, &mut self.rng)
    }

    fn true_force(&self) -> T {
        self.state.true_force
    }

    fn servo_angle(&self) -> T {
        self.state.servo_angle
    }

    fn apply(&mut self, command: T, dt: T) {
        self.state = self.plant.step(&self.state, command, dt, &self.tomato);
    }
}

/// Runs `steps` control periods: measure, compute command, record, actuate.
pub fn run_closed_loop<T: Scalar, P: ForceLoopPlant<T>>(
    plant: &mut P,
    controller: &PidController<T>,
    f_ref: T,
    steps: usize,
    dt: T,
) -> ForceTrace<T> {
    let mut samples = Vec::with_capacity(steps);
    let mut state = ControllerState::new(plant.servo_angle());
    for k in 0..steps {
        let measured = plant.measure();
        let (command, next) = controller.step(&state, f_ref, measured, dt);
        state = next;
        samples.push(TraceSample {
            time: T::from_usize(k).unwrap() * dt,
            reference: f_ref,
            measured,
            true_force: plant.true_force(),
            command,
            servo_angle: plant.servo_angle(),
        });
        plant.apply(command, dt);
    }
    ForceTrace { dt, samples }
}

/// Where the PID output is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseAngle<T> {
    /// Fixed servo angle, degrees.
    Fixed { angle: T },
    /// Contact-engagement angle of the fruit's diameter minus `margin` degrees.
    ContactAngle { margin: T },
}

/// Simulated bench: gripper plant plus controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspRig<T> {
    pub plant: GripperPlant<T>,
    pub tuning: PidTuning<T>,
    /// Degrees of servo command per unit of raw PID output.
    pub output_scale: T,
    pub base: BaseAngle<T>,
    /// Loop period, s.
    pub dt: T,
}

impl<T: Scalar> Default for GraspRig<T> {
    fn default() -> Self {
        Self {
            plant: GripperPlant::default(),
            tuning: PidTuning::default(),
            output_scale: lit(3500.0),
            base: BaseAngle::ContactAngle { margin: T::zero() },
            dt: lit(DEFAULT_DT),
        }
    }
}

impl<T: Scalar> GraspRig<T> {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.tuning.validate()?;
        if !(self.output_scale > T::zero()) {
            return Err(ControlError::InvalidArgument(
                "output_scale must be positive".into(),
            ));
        }
        if !(self.dt > T::zero()) {
            return Err(ControlError::InvalidArgument("dt must be positive".into()));
        }
        Ok(())
    }

    pub fn base_angle(&self, tomato: &TomatoSample<T>) -> T {
        let raw = match self.base {
            BaseAngle::Fixed { angle } => angle,
            BaseAngle::ContactAngle { margin } => {
                self.plant.contact.contact_angle(tomato.diameter) - margin
            }
        };
        self.plant.servo.clamp(raw)
    }

    pub fn controller(&self, gains: PidGains<T>, tomato: &TomatoSample<T>) -> PidController<T> {
        let mut output = OutputMap::new(self.base_angle(tomato), self.output_scale);
        output.min = self.plant.servo.angle_min;
        output.max = self.plant.servo.angle_max;
        PidController::new(gains, self.tuning, output)
    }

    fn steps_for(&self, duration: T) -> Result<usize> {
        if !(duration > T::zero()) {
            return Err(ControlError::InvalidArgument(
                "duration must be positive".into(),
            ));
        }
        Ok((duration / self.dt).round().to_usize().unwrap_or(0))
    }

    /// Closed grasp from the open servo position, holding `f_ref` for `duration` seconds.
    ///
    /// Metrics are only meaningful for `duration >= 5 s`.
    pub fn run_grasp(
        &self,
        tomato: &TomatoSample<T>,
        gains: &PidGains<T>,
        f_ref: T,
        duration: T,
        seed: u64,
    ) -> Result<ForceTrace<T>> {
        self.validate()?;
        tomato.validate()?;
        gains.validate()?;
        if !(f_ref >= T::zero()) {
            return Err(ControlError::InvalidArgument(
                "reference force must be non-negative".into(),
            ));
        }
        let steps = self.steps_for(duration)?;
        let mut grasp = SimulatedGrasp::new(self.plant, tomato.clone(), seed);
        Ok(run_closed_loop(
            &mut grasp,
            &self.controller(*gains, tomato),
            f_ref,
            steps,
            self.dt,
        ))
    }

    /// Grasp and hold for `hold` seconds, then command the servo back open for `release` seconds.
    pub fn run_grasp_hold_release(
        &self,
        tomato: &TomatoSample<T>,
        gains: &PidGains<T>,
        f_ref: T,
        hold: T,
        release: T,
        seed: u64,
    ) -> Result<ForceTrace<T>> {
        self.validate()?;
        tomato.validate()?;
        gains.validate()?;
        let hold_steps = self.steps_for(hold)?;
        let release_steps = self.steps_for(release)?;
        let mut grasp = SimulatedGrasp::new(self.plant, tomato.clone(), seed);
        let mut trace = run_closed_loop(
            &mut grasp,
            &self.controller(*gains, tomato),
            f_ref,
            hold_steps,
            self.dt,
        );
        let open = self.plant.open_angle;
        for k in 0..release_steps {
            let measured = grasp.measure();
            trace.samples.push(TraceSample {
                time: T::from_usize(hold_steps + k).unwrap() * self.dt,
                reference: T::zero(),
                measured,
                true_force: grasp.true_force(),
                command: open,
                servo_angle: grasp.servo_angle(),
            });
            grasp.apply(open, self.dt);
        }
        Ok(trace)
    }
}

/// Settings for the sustained-oscillation search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZnOptions<T> {
    /// Length of each proportional-only probe run, s.
    pub probe_duration: T,
    /// Error hysteresis band for counting zero crossings, N.
    pub crossing_band: T,
    pub min_crossings: usize,
    /// Smallest accepted ratio between same-sign peaks one period apart.
    pub amplitude_ratio: T,
}

impl<T: Scalar> Default for ZnOptions<T> {
    fn default() -> Self {
        Self {
            probe_duration: lit(10.0),
            crossing_band: lit(SETTLE_BAND),
            min_crossings: 4,
            amplitude_ratio: lit(0.9),
        }
    }
}

/// Ultimate gain and period found by the sweep, with the derived PID gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZnTuning<T> {
    pub ultimate_gain: T,
    pub ultimate_period: T,
    pub gains: PidGains<T>,
}

/// Classic Ziegler-Nichols PID rule: `kp = 0.6 Ku`, `ki = 2 kp / Pu`, `kd = kp Pu / 8`.
pub fn zn_gains<T: Scalar>(ultimate_gain: T, ultimate_period: T) -> PidGains<T> {
    let kp = lit::<T>(0.6) * ultimate_gain;
    PidGains::new(
        kp,
        lit::<T>(2.0) * kp / ultimate_period,
        kp * ultimate_period / lit(8.0),
    )
}

/// Sustained oscillation in an error series, as `(crossing count, period)`.
///
/// The second half of the series is examined. Crossings are counted with
/// hysteresis: the error must leave `+-band` on the opposite side. The
/// oscillation is sustained if there are at least `min_crossings` crossings
/// and each of the last `min_crossings` complete half-cycle peaks is at least
/// `amplitude_ratio` times the same-sign peak one period earlier.
pub fn detect_oscillation<T: Scalar>(
    errors: &[T],
    dt: T,
    options: &ZnOptions<T>,
) -> Option<(usize, T)> {
    let start = errors.len() / 2;
    let window = &errors[start..];
    let band = options.crossing_band;

    let mut side = 0i8;
    let mut crossings: Vec<usize> = Vec::new();
    let mut peaks: Vec<T> = Vec::new();
    let mut current_peak = T::zero();
    for (i, &e) in window.iter().enumerate() {
        let s = if e > band {
            1
        } else if e < -band {
            -1
        } else {
            0
        };
        if s != 0 && s != side {
            if side != 0 {
                crossings.push(i);
                peaks.push(current_peak);
            }
            side = s;
            current_peak = T::zero();
        }
        current_peak = current_peak.max(e.abs());
    }

    if crossings.len() < options.min_crossings.max(2) {
        return None;
    }
    // peaks[0] belongs to a half-cycle that may have started before the window.
    let complete = &peaks[1..];
    if complete.len() < 3 {
        return None;
    }
    let tail = options.min_crossings.min(complete.len());
    let recent = &complete[complete.len() - tail..];
    let offset = complete.len() - tail;
    for (j, &peak) in recent.iter().enumerate() {
        let idx = offset + j;
        if idx < 2 {
            continue;
        }
        let earlier = complete[idx - 2];
        if earlier > T::zero() && peak / earlier < options.amplitude_ratio {
            return None;
        }
    }
    let intervals = crossings.len() - 1;
    let span = T::from_usize(crossings[crossings.len() - 1] - crossings[0]).unwrap() * dt;
    let half_period = span / T::from_usize(intervals).unwrap();
    Some((crossings.len(), half_period + half_period))
}

/// Sweeps `kp_grid` with `ki = kd = 0` on any plant until the loop sustains an oscillation.
pub fn zn_autotune_on<T, P, F>(
    mut make_plant: F,
    output: OutputMap<T>,
    kp_grid: &[T],
    f_ref: T,
    dt: T,
    options: &ZnOptions<T>,
) -> Result<ZnTuning<T>>
where
    T: Scalar,
    P: ForceLoopPlant<T>,
    F: FnMut() -> P,
{
    if kp_grid.is_empty() {
        return Err(ControlError::InvalidArgument("kp grid is empty".into()));
    }
    if kp_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ControlError::InvalidArgument(
            "kp grid must be strictly ascending".into(),
        ));
    }
    let steps = (options.probe_duration / dt)
        .round()
        .to_usize()
        .unwrap_or(0);
    for &kp in kp_grid {
        let controller =
            PidController::new(PidGains::proportional(kp), PidTuning::default(), output);
        let mut plant = make_plant();
        let trace = run_closed_loop(&mut plant, &controller, f_ref, steps, dt);
        let errors: Vec<T> = trace
            .samples
            .iter()
            .map(|s| s.reference - s.measured)
            .collect();
        if let Some((_, period)) = detect_oscillation(&errors, dt, options) {
            return Ok(ZnTuning {
                ultimate_gain: kp,
                ultimate_period: period,
                gains: zn_gains(kp, period),
            });
        }
    }
    Err(ControlError::NoOscillationFound {
        max_kp: kp_grid[kp_grid.len() - 1].to_f64().unwrap_or(f64::NAN),
    })
}

impl<T: Scalar> GraspRig<T> {
    /// Ziegler-Nichols sweep on this rig holding `tomato`.
    pub fn zn_autotune(
        &self,
        tomato: &TomatoSample<T>,
        kp_grid: &[T],
        f_ref: T,
        options: &ZnOptions<T>,
        seed: u64,
    ) -> Result<ZnTuning<T>> {
        self.validate()?;
        tomato.validate()?;
        let output = self
            .controller(PidGains::proportional(T::zero()), tomato)
            .output;
        zn_autotune_on(
            || SimulatedGrasp::new(self.plant, tomato.clone(), seed),
            output,
            kp_grid,
            f_ref,
            self.dt,
            options,
        )
    }
}

/// `n` evenly spaced gains in `[lo, hi]`.
pub fn kp_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    crate::mechanism::force_grid(lo, hi, n)
}
