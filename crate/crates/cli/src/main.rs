use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Exit status for configuration and argument errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit status when the requested geometry, motion or tuning is infeasible.
pub const EXIT_INFEASIBLE: u8 = 3;
/// Exit status for file-system failures.
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "auxgrip",
    version,
    about = "Tomato-harvesting gripper simulation suite"
)]
pub struct Cli {
    /// TOML configuration file; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Linkage and torque analysis.
    #[command(subcommand)]
    Mech(MechCommand),
    /// Closed-loop grasp simulation; writes a force trace.
    Grasp(GraspArgs),
    /// Ziegler-Nichols sweep on the simulated gripper.
    Tune(TuneArgs),
    /// Solve an arm goal with PSO and write the joint trajectory.
    Plan(PlanArgs),
    /// Detection metrics on synthetic scenes.
    #[command(subcommand)]
    Perception(PerceptionCommand),
    /// Picking-cycle campaigns.
    #[command(subcommand)]
    Harvest(HarvestCommand),
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Subcommand, Debug)]
pub enum MechCommand {
    /// Motor torque over a grid of grasp forces.
    TorqueCurve(TorqueCurveArgs),
    /// Linkage state over the crank range.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct TorqueCurveArgs {
    #[arg(long, default_value_t = 0.0)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    /// Fingers driven by the same actuator.
    #[arg(long, default_value_t = 6)]
    pub fingers: u32,
    /// Transmission efficiency.
    #[arg(long, default_value_t = 0.8)]
    pub eta: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the closed-form comparison table at this force.
    #[arg(long)]
    pub discrepancy: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub discrepancy_force: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GraspArgs {
    /// Tomato id from the plant table, or `custom`.
    #[arg(long)]
    pub tomato: Option<String>,
    /// Custom tomato mass, g.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Custom tomato diameter, mm.
    #[arg(long)]
    pub diameter: Option<f64>,
    /// Reference force in N, or `auto` for the configured reference policy.
    #[arg(long = "ref", default_value = "auto")]
    pub reference: String,
    /// `kp,ki,kd`
    #[arg(long)]
    pub gains: Option<String>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
    /// Open the gripper for this many seconds after the hold.
    #[arg(long)]
    pub release: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[arg(long)]
    pub tomato: Option<String>,
    #[arg(long = "ref", default_value = "auto")]
    pub reference: String,
    #[arg(long, default_value_t = 0.01)]
    pub kp_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub kp_max: f64,
    #[arg(long, default_value_t = 200)]
    pub kp_points: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// `x,y,z` in mm, optionally followed by an approach direction `ax,ay,az`.
    #[arg(long, allow_hyphen_values = true)]
    pub target: String,
    /// `particles,iters,w,c1,c2`
    #[arg(long)]
    pub pso: Option<String>,
    /// Move duration from the home posture, s.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum PerceptionCommand {
    /// Simulate detections on random scenes and score them.
    Eval(PerceptionArgs),
}

#[derive(Args, Debug)]
pub struct PerceptionArgs {
    #[arg(long, default_value_t = 100)]
    pub scenes: usize,
    /// `kp_sigma,miss,fp,confusion`
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the generated ground truth as JSON.
    #[arg(long)]
    pub export_scenes: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum HarvestCommand {
    /// Monte Carlo picking campaign.
    Run(HarvestArgs),
}

#[derive(Args, Debug)]
pub struct HarvestArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Per-stage duration table over successful trials.
    #[arg(long)]
    pub stages: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ConfigCommand {
    /// Write the default configuration.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a configuration file.
    Check,
}

/// Manifest path for a primary output: `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
