use auxgrip::control::{
    kp_grid, pid_step, zn_autotune_on, ControlError, ControllerState, ForceLoopPlant, GraspRig,
    OutputMap, PidController, PidGains, PidTuning, ZnOptions,
};
use auxgrip::plant::{fsr_mean, fsr_read, sample_by_id, FsrModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Noise-free first-order lag: no phase crossover, so proportional gain alone never oscillates.
struct FirstOrderLag {
    force: f64,
    gain: f64,
    tau: f64,
}

impl ForceLoopPlant<f64> for FirstOrderLag {
    fn measure(&mut self) -> f64 {
        self.force
    }
    fn true_force(&self) -> f64 {
        self.force
    }
    fn servo_angle(&self) -> f64 {
        self.force / self.gain
    }
    fn apply(&mut self, command: f64, dt: f64) {
        let target = self.gain * command;
        self.force += (target - self.force) * (dt / self.tau);
    }
}

#[test]
fn first_order_lag_reports_no_oscillation() {
    let grid = kp_grid(0.01, 2.0, 50);
    let out = OutputMap::new(0.0, 100.0);
    let err = zn_autotune_on(
        || FirstOrderLag {
            force: 0.0,
            gain: 0.01,
            tau: 0.5,
        },
        out,
        &grid,
        0.3,
        0.01,
        &ZnOptions::default(),
    )
    .unwrap_err();
    assert!(
        matches!(err, ControlError::NoOscillationFound { max_kp } if (max_kp - 2.0).abs() < 1e-12)
    );
}

#[test]
fn nominal_autotune_gives_a_bounded_loop() {
    let rig = GraspRig::<f64>::default();
    let tomato = sample_by_id::<f64>("F3").unwrap();
    let tuning = rig
        .zn_autotune(
            &tomato,
            &kp_grid(0.01, 2.0, 200),
            0.3,
            &ZnOptions::default(),
            3,
        )
        .unwrap();
    assert!(tuning.ultimate_gain > 0.0 && tuning.ultimate_period > 0.0);
    let g = tuning.gains;
    assert!((g.kp - 0.6 * tuning.ultimate_gain).abs() < 1e-12);
    let trace = rig.run_grasp(&tomato, &g, 0.3, 5.0, 3).unwrap();
    let peak = trace.peak_true_force();
    assert!(
        peak.is_finite() && peak <= rig.plant.contact.force_cap,
        "peak {peak}"
    );
    assert!(trace
        .samples
        .iter()
        .all(|s| (0.0..=180.0).contains(&s.command)));
}

#[test]
fn release_decays_force_monotonically_to_zero() {
    let rig = GraspRig::<f64>::default();
    let tomato = sample_by_id::<f64>("F2").unwrap();
    let trace = rig
        .run_grasp_hold_release(&tomato, &PidGains::nominal(), 0.3, 3.0, 2.0, 4)
        .unwrap();
    let hold_steps = (3.0f64 / rig.dt).round() as usize;
    let release = &trace.samples[hold_steps..];
    assert!(release
        .windows(2)
        .all(|w| w[1].true_force <= w[0].true_force));
    assert_eq!(release.last().unwrap().true_force, 0.0);
    assert!(trace.samples[hold_steps - 1].true_force > 0.2);
}

#[test]
fn fsr_average_has_reduced_spread() {
    let fsr = FsrModel::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let singles: Vec<f64> = (0..n).map(|_| fsr_read(&fsr, 0.5, &mut rng)).collect();
    let means: Vec<f64> = (0..n).map(|_| fsr_mean(&fsr, 0.5, 3, &mut rng)).collect();
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var.sqrt())
    };
    let (m1, s1) = stats(&singles);
    let (m3, s3) = stats(&means);
    // Quantisation adds q^2/12 of variance on top of the Gaussian noise.
    let q = fsr.resolution();
    let expected = (fsr.noise_sigma.powi(2) + q * q / 12.0).sqrt();
    assert!((m1 - 0.5).abs() < 1e-3 && (m3 - 0.5).abs() < 1e-3);
    assert!(
        (s1 - expected).abs() / expected < 0.05,
        "single sd {s1} vs {expected}"
    );
    assert!(
        (s3 - expected / 3f64.sqrt()).abs() / expected < 0.05,
        "mean sd {s3}"
    );
}

fn arb_gains() -> impl Strategy<Value = PidGains<f64>> {
    (0.0f64..5.0, 0.0f64..5.0, 0.0f64..0.5).prop_map(|(kp, ki, kd)| PidGains::new(kp, ki, kd))
}

proptest! {
    #[test]
    fn command_is_always_within_servo_range(
        gains in arb_gains(),
        base in 0.0f64..180.0,
        errors in prop::collection::vec(-5.0f64..5.0, 1..200),
    ) {
        let c = PidController::new(gains, PidTuning::default(), OutputMap::new(base, 3500.0));
        let mut state = ControllerState::new(base);
        for e in errors {
            let (cmd, next) = pid_step(&c, &state, 0.3, 0.3 - e, 0.01);
            prop_assert!((0.0..=180.0).contains(&cmd));
            state = next;
        }
    }

    #[test]
    fn integral_never_exceeds_its_clamp(
        gains in arb_gains(),
        errors in prop::collection::vec(-0.2f64..0.2, 1..400),
    ) {
        let tuning = PidTuning::default();
        let c = PidController::new(gains, tuning, OutputMap::new(90.0, 3500.0));
        let mut state = ControllerState::new(90.0);
        for e in errors {
            let (_, next) = c.step(&state, 0.3, 0.3 - e, 0.01);
            prop_assert!(next.integral.abs() <= tuning.integral_limit + 1e-12);
            state = next;
        }
    }

    #[test]
    fn saturated_push_does_not_wind_up(ki in 0.01f64..5.0, n in 10usize..300) {
        // Error far above the output range: the command pins at the top and the integral stays put.
        let c = PidController::new(PidGains::new(1.0, ki, 0.0), PidTuning { integral_band: 10.0, ..PidTuning::default() }, OutputMap::new(170.0, 3500.0));
        let mut state = ControllerState::new(170.0);
        let mut integrals = Vec::new();
        for _ in 0..n {
            let (cmd, next) = c.step(&state, 1.0, 0.0, 0.01);
            prop_assert_eq!(cmd, 180.0);
            integrals.push(next.integral);
            state = next;
        }
        // Only the step before the output first pins may integrate.
        prop_assert!((integrals[0] - 0.01).abs() < 1e-15);
        prop_assert!(integrals.iter().all(|&i| i == integrals[0]));
    }
}
