use std::path::{Path, PathBuf};

use auxgrip::arm::{forward_kinematics, plan_trajectory, pso_solve_goal, ArmError, Pose};
use auxgrip::config::{ConfigError, RunConfig, RunManifest};
use auxgrip::control::{response_metrics, ControlError, PidGains, ZnOptions};
use auxgrip::harvest::{stage_report, write_records_csv, HarvestError, Harvester};
use auxgrip::mechanism::{
    discrepancy_table, force_grid, force_torque_curve, linkage_jacobian, multi_finger_demand,
    solve_linkage, MechanismError,
};
use auxgrip::perception::{evaluate_batch, keypoint_error, simulate_batch, PerceptionError};
use auxgrip::plant::TomatoSample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{
    manifest_path, Cli, CliError, Command, ConfigCommand, GraspArgs, HarvestArgs, HarvestCommand,
    MechCommand, PerceptionArgs, PerceptionCommand, PlanArgs, SweepArgs, TorqueCurveArgs, TuneArgs,
};

type Result<T> = std::result::Result<T, CliError>;

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> Self {
        match e {
            MechanismError::InfeasibleConfiguration { .. }
            | MechanismError::DegenerateDiagonal { .. }
            | MechanismError::NoConsistentBranch { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ArmError> for CliError {
    fn from(e: ArmError) -> Self {
        match e {
            ArmError::Unreachable { .. } | ArmError::VelocityInfeasible { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::NoOscillationFound { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<HarvestError> for CliError {
    fn from(e: HarvestError) -> Self {
        match e {
            HarvestError::Arm(a) => a.into(),
            HarvestError::Control(c) => c.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PerceptionError> for CliError {
    fn from(e: PerceptionError) -> Self {
        match e {
            PerceptionError::PlacementFailed { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Files produced by one command, written only after everything has been computed.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, path: &Path, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes to JSON");
        bytes.push(b'\n');
        self.add(path, bytes);
    }

    /// Adds the manifest next to `primary` and writes everything through temp files.
    fn commit(
        mut self,
        command: &str,
        config: &RunConfig,
        seed: Option<u64>,
        primary: &Path,
    ) -> Result<()> {
        let listed: Vec<String> = self
            .files
            .iter()
            .map(|(p, _)| p.display().to_string())
            .collect();
        let manifest = RunManifest::new(command, config, seed, listed);
        self.add_json(&manifest_path(primary), &manifest);
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn parse_list(text: &str, expected: &[usize], what: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|_| {
        usage(format!(
            "{what}: expected comma-separated numbers, got {text:?}"
        ))
    })?;
    if !expected.contains(&values.len()) {
        return Err(usage(format!(
            "{what}: expected {expected:?} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("{what}: values must be finite")));
    }
    Ok(values)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

/// Geometry infeasibility gets its own exit code, so it is checked before the generic validation.
fn validate(cfg: &RunConfig) -> Result<()> {
    cfg.geometry.geometry().validate()?;
    cfg.validate()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Mech(MechCommand::TorqueCurve(args)) => torque_curve(&cfg, &args),
        Command::Mech(MechCommand::Sweep(args)) => sweep(&cfg, &args),
        Command::Grasp(args) => {
            cfg.seed = args.seed;
            grasp(&mut cfg, &args)
        }
        Command::Tune(args) => {
            cfg.seed = args.seed;
            tune(&cfg, &args)
        }
        Command::Plan(args) => {
            cfg.seed = args.seed;
            plan(&mut cfg, &args)
        }
        Command::Perception(PerceptionCommand::Eval(args)) => {
            cfg.seed = args.seed;
            perception_eval(&mut cfg, &args)
        }
        Command::Harvest(HarvestCommand::Run(args)) => {
            cfg.seed = args.seed;
            harvest_run(&cfg, &args)
        }
        Command::Config(ConfigCommand::Init { out }) => {
            let cfg = RunConfig::default();
            write_atomic(&out, cfg.to_toml_string().as_bytes())
        }
        Command::Config(ConfigCommand::Check) => {
            validate(&cfg)?;
            println!("{}", cfg.hash());
            Ok(())
        }
    }
}

fn torque_curve(cfg: &RunConfig, args: &TorqueCurveArgs) -> Result<()> {
    validate(cfg)?;
    if !(args.eta > 0.0 && args.eta <= 1.0) || args.fingers == 0 {
        return Err(usage(
            "--eta must lie in (0, 1] and --fingers be at least 1",
        ));
    }
    let geom = cfg.geometry.geometry();
    let grid = force_grid(args.p_min, args.p_max, args.points);
    let curve = force_torque_curve(&geom, &cfg.geometry.contact_map(), &grid)?;
    let demand_header = format!("demand_{}f_eta{}_N_mm", args.fingers, args.eta);
    let bytes = csv_bytes(|out| {
        use std::io::Write;
        writeln!(out, "P_newton,theta_rad,T_newton_mm,{demand_header}")?;
        for p in &curve {
            let demand = multi_finger_demand(p.torque, args.fingers, args.eta);
            writeln!(
                out,
                "{:.6},{:.9},{:.9},{:.9}",
                p.force, p.theta, p.torque, demand
            )?;
        }
        Ok(())
    });
    let mut outputs = Outputs::new();
    outputs.add(&args.out, bytes);
    if let Some(path) = &args.discrepancy {
        let rows = discrepancy_table(&geom, &geom.sweep(25), args.discrepancy_force)?;
        outputs.add(
            path,
            csv_bytes(|out| {
                use std::io::Write;
                writeln!(out, "theta_rad,virtual_work_N_mm,closed_form_N_mm,intermediate_N_mm,abs_diff,rel_diff")?;
                for r in &rows {
                    let rel = if r.rel_diff.is_finite() {
                        format!("{:.6}", r.rel_diff)
                    } else {
                        String::new()
                    };
                    writeln!(
                        out,
                        "{:.6},{:.9},{:.9},{:.9},{:.9},{rel}",
                        r.theta, r.virtual_work, r.closed_form, r.intermediate, r.abs_diff
                    )?;
                }
                Ok(())
            }),
        );
    }
    outputs.commit("mech torque-curve", cfg, None, &args.out)
}

fn sweep(cfg: &RunConfig, args: &SweepArgs) -> Result<()> {
    validate(cfg)?;
    if args.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    let geom = cfg.geometry.geometry();
    let mut rows = Vec::with_capacity(args.points);
    for theta in geom.sweep(args.points) {
        let s = solve_linkage(&geom, theta)?;
        let (r1, r2) = s.loop_residuals(&geom);
        rows.push((s, linkage_jacobian(&geom, theta)?, r1, r2));
    }
    let bytes = csv_bytes(|out| {
        use std::io::Write;
        writeln!(
            out,
            "theta_rad,beta_rad,xi_rad,coupler_rad,k_mm,dxi_dtheta,residual_x_mm,residual_y_mm"
        )?;
        for (s, j, r1, r2) in &rows {
            writeln!(
                out,
                "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.3e},{:.3e}",
                s.theta, s.beta, s.xi, s.coupler_angle, s.k, j, r1, r2
            )?;
        }
        Ok(())
    });
    let mut outputs = Outputs::new();
    outputs.add(&args.out, bytes);
    outputs.commit("mech sweep", cfg, None, &args.out)
}

fn resolve_tomato(
    cfg: &RunConfig,
    id: Option<&str>,
    mass: Option<f64>,
    diameter: Option<f64>,
) -> Result<TomatoSample<f64>> {
    let id = id.unwrap_or(&cfg.control.nominal_tomato);
    if id.eq_ignore_ascii_case("custom") {
        let (Some(mass), Some(diameter)) = (mass, diameter) else {
            return Err(usage("--tomato custom needs --mass and --diameter"));
        };
        let template = cfg.plant.tomatoes[0].clone();
        return TomatoSample::new(
            "custom",
            mass,
            diameter,
            template.stiffness,
            template.friction_mu,
        )
        .map_err(|e| usage(e.to_string()));
    }
    cfg.plant
        .tomato(id)
        .cloned()
        .ok_or_else(|| usage(format!("unknown tomato {id:?}")))
}

fn resolve_reference(cfg: &RunConfig, text: &str, tomato: &TomatoSample<f64>) -> Result<f64> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(cfg.control.reference.reference_for(tomato));
    }
    let f: f64 = text.parse().map_err(|_| {
        usage(format!(
            "--ref: expected a force in N or `auto`, got {text:?}"
        ))
    })?;
    if !(f >= 0.0 && f.is_finite()) {
        return Err(usage("--ref must be a non-negative force"));
    }
    Ok(f)
}

#[derive(Serialize)]
struct GraspSummary {
    tomato: String,
    reference_n: f64,
    gains: PidGains<f64>,
    settle_time_s: Option<f64>,
    overshoot: f64,
    steady_state_dev_n: f64,
    plateau_n: f64,
    peak_true_force_n: f64,
}

fn grasp(cfg: &mut RunConfig, args: &GraspArgs) -> Result<()> {
    if let Some(g) = &args.gains {
        let v = parse_list(g, &[3], "--gains")?;
        cfg.control.gains = PidGains::new(v[0], v[1], v[2]);
    }
    if let Some(d) = args.duration {
        cfg.control.duration = d;
    }
    validate(cfg)?;
    let tomato = resolve_tomato(cfg, args.tomato.as_deref(), args.mass, args.diameter)?;
    let f_ref = resolve_reference(cfg, &args.reference, &tomato)?;
    let rig = cfg.grasp_rig();
    let gains = cfg.control.gains;
    let hold_trace = rig.run_grasp(&tomato, &gains, f_ref, cfg.control.duration, args.seed)?;
    let metrics = response_metrics(&hold_trace)?;
    let trace = match args.release {
        Some(r) => {
            rig.run_grasp_hold_release(&tomato, &gains, f_ref, cfg.control.duration, r, args.seed)?
        }
        None => hold_trace.clone(),
    };
    let summary = GraspSummary {
        tomato: tomato.id.clone(),
        reference_n: f_ref,
        gains,
        settle_time_s: metrics.settle_time,
        overshoot: metrics.overshoot,
        steady_state_dev_n: metrics.steady_state_dev,
        plateau_n: hold_trace.tail_mean_measured(),
        peak_true_force_n: trace.peak_true_force(),
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    let mut outputs = Outputs::new();
    outputs.add(&args.out, csv_bytes(|out| trace.write_csv(out)));
    outputs.commit("grasp", cfg, Some(args.seed), &args.out)
}

#[derive(Serialize)]
struct TuneReport {
    tomato: String,
    reference_n: f64,
    ultimate_gain: f64,
    ultimate_period_s: f64,
    gains: PidGains<f64>,
    validation_peak_force_n: f64,
    validation_bounded: bool,
}

fn tune(cfg: &RunConfig, args: &TuneArgs) -> Result<()> {
    validate(cfg)?;
    if args.kp_points == 0
        || !(args.kp_min < args.kp_max || args.kp_points == 1)
        || args.kp_min.is_nan()
        || args.kp_min < 0.0
    {
        return Err(usage(
            "kp grid needs 0 <= kp_min < kp_max and at least one point",
        ));
    }
    let tomato = resolve_tomato(cfg, args.tomato.as_deref(), None, None)?;
    let f_ref = resolve_reference(cfg, &args.reference, &tomato)?;
    let rig = cfg.grasp_rig();
    let grid = force_grid(args.kp_min, args.kp_max, args.kp_points);
    let tuning = rig.zn_autotune(&tomato, &grid, f_ref, &ZnOptions::default(), args.seed)?;
    let check = rig.run_grasp(
        &tomato,
        &tuning.gains,
        f_ref,
        cfg.control.duration,
        args.seed,
    )?;
    let peak = check.peak_true_force();
    let report = TuneReport {
        tomato: tomato.id.clone(),
        reference_n: f_ref,
        ultimate_gain: tuning.ultimate_gain,
        ultimate_period_s: tuning.ultimate_period,
        gains: tuning.gains,
        validation_peak_force_n: peak,
        validation_bounded: peak.is_finite() && peak <= rig.plant.contact.force_cap,
    };
    let mut outputs = Outputs::new();
    outputs.add_json(&args.out, &report);
    outputs.commit("tune", cfg, Some(args.seed), &args.out)
}

#[derive(Serialize)]
struct PlanReport {
    q_rad: [f64; 5],
    cost: f64,
    position_error_mm: f64,
    direction_error_rad: f64,
    converged: bool,
    restarts: usize,
    reached_mm: [f64; 3],
}

fn plan(cfg: &mut RunConfig, args: &PlanArgs) -> Result<()> {
    let target = parse_list(&args.target, &[3, 6], "--target")?;
    if let Some(p) = &args.pso {
        let v = parse_list(p, &[5], "--pso")?;
        if v[0] < 0.0 || v[1] < 0.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
            return Err(usage(
                "--pso particle and iteration counts must be non-negative integers",
            ));
        }
        cfg.arm.pso.particle_count = v[0] as usize;
        cfg.arm.pso.iteration_count = v[1] as usize;
        cfg.arm.pso.inertia = v[2];
        cfg.arm.pso.cognitive = v[3];
        cfg.arm.pso.social = v[4];
    }
    if let Some(d) = args.duration {
        cfg.arm.move_duration = d;
    }
    let position_only = target.len() == 3;
    if position_only {
        cfg.arm.weight_dir = 0.0;
    }
    validate(cfg)?;
    let approach = if position_only {
        [1.0, 0.0, 0.0]
    } else {
        [target[3], target[4], target[5]]
    };
    let pose = Pose::new([target[0], target[1], target[2]], approach)?;
    let chain = cfg.arm.chain();
    let solution = pso_solve_goal(
        &chain,
        &pose,
        &cfg.arm.pso.params(args.seed),
        &cfg.arm.weights(),
    )?;
    if !solution.converged {
        eprintln!(
            "warning: PSO did not converge (cost {:.3} above {:.3}); using best-so-far",
            solution.cost, cfg.arm.pso.convergence_threshold
        );
    }
    let trajectory = plan_trajectory(
        &chain,
        &cfg.arm.home(),
        &solution.q,
        cfg.arm.move_duration,
        cfg.arm.trajectory_dt,
    )?;
    let report = PlanReport {
        q_rad: solution.q,
        cost: solution.cost,
        position_error_mm: solution.position_error,
        direction_error_rad: solution.direction_error,
        converged: solution.converged,
        restarts: solution.restarts,
        reached_mm: forward_kinematics(&chain, &solution.q).position,
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    let mut outputs = Outputs::new();
    outputs.add(&args.out, csv_bytes(|out| trajectory.write_csv(out)));
    outputs.commit("plan", cfg, Some(args.seed), &args.out)
}

#[derive(Serialize)]
struct PerceptionReport {
    scenes: usize,
    tomatoes_per_scene: usize,
    iou_threshold: f64,
    precision: f64,
    recall: f64,
    mask_ap: f64,
    true_positives: usize,
    false_positives: usize,
    false_negatives: usize,
    keypoints: Option<auxgrip::perception::KeypointErrors<f64>>,
}

fn perception_eval(cfg: &mut RunConfig, args: &PerceptionArgs) -> Result<()> {
    if let Some(n) = &args.noise {
        let v = parse_list(n, &[4], "--noise")?;
        cfg.perception.noise.keypoint_sigma = v[0];
        cfg.perception.noise.miss_rate = v[1];
        cfg.perception.noise.false_positive_rate = v[2];
        cfg.perception.noise.ripeness_confusion = v[3];
    }
    validate(cfg)?;
    if args.scenes == 0 {
        return Err(usage("--scenes must be at least 1"));
    }
    let p = &cfg.perception;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let images = simulate_batch(
        args.scenes,
        p.tomatoes_per_scene,
        &p.scene,
        &p.noise,
        &mut rng,
    )?;
    let metrics = evaluate_batch(&images, p.iou_threshold)?;
    let keypoints = match keypoint_error(&images) {
        Ok(k) => Some(k),
        Err(PerceptionError::NoMatches) => None,
        Err(e) => return Err(e.into()),
    };
    let report = PerceptionReport {
        scenes: args.scenes,
        tomatoes_per_scene: p.tomatoes_per_scene,
        iou_threshold: p.iou_threshold,
        precision: metrics.precision,
        recall: metrics.recall,
        mask_ap: metrics.mask_ap,
        true_positives: metrics.true_positives,
        false_positives: metrics.false_positives,
        false_negatives: metrics.false_negatives,
        keypoints,
    };
    let mut outputs = Outputs::new();
    outputs.add_json(&args.out, &report);
    if let Some(path) = &args.export_scenes {
        let scenes: Vec<_> = images.iter().map(|im| &im.ground_truth).collect();
        outputs.add_json(path, &scenes);
    }
    outputs.commit("perception eval", cfg, Some(args.seed), &args.out)
}

#[derive(Serialize)]
struct HarvestReport {
    summary: auxgrip::harvest::CampaignSummary,
    stage_report: auxgrip::harvest::StageReport,
}

fn harvest_run(cfg: &RunConfig, args: &HarvestArgs) -> Result<()> {
    validate(cfg)?;
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let harvester = Harvester::new(cfg.harvest_config()?)?;
    let (summary, records) = harvester.run_campaign(args.trials, args.seed)?;
    let report = stage_report(&records)?;
    let mut outputs = Outputs::new();
    if let Some(path) = &args.stages {
        outputs.add(path, csv_bytes(|out| report.write_csv(out)));
    }
    outputs.add_json(
        &args.out,
        &HarvestReport {
            summary,
            stage_report: report,
        },
    );
    if let Some(path) = &args.records {
        outputs.add(path, csv_bytes(|out| write_records_csv(&records, out)));
    }
    outputs.commit("harvest run", cfg, Some(args.seed), &args.out)
}
