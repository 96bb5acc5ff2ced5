//! `sidewinder`: reference generation, rollout, identification, evaluation
//! and friction-curve export.
//!
//! Exit codes: 0 ok, 1 output i/o failure, 2 configuration error,
//! 3 simulation blow-up, 4 non-finite training.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod files;

#[derive(Debug, Parser)]
#[command(name = "sidewinder", version, about = "Snake-robot simulator with PPO parameter identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate hidden parameters to produce reference recordings.
    MakeReference(MakeReferenceArgs),
    /// Identify actuator and friction parameters from a reference directory.
    Identify(IdentifyArgs),
    /// Score parameter sets against one reference recording.
    Evaluate(EvaluateArgs),
    /// Simulate one gait and write the trajectory CSV.
    Rollout(RolloutArgs),
    /// Write the tangential friction force over a range of slip speeds.
    DumpFrictionCurve(FrictionArgs),
}

#[derive(Debug, Args)]
struct SimFlags {
    /// Robot model JSON; defaults to the built-in robot.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Disable the clamp that keeps the ground normal force non-negative.
    #[arg(long)]
    no_normal_clamp: bool,
}

#[derive(Debug, Args)]
pub struct MakeReferenceArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Hidden parameters that generate the references.
    #[arg(long)]
    truth: PathBuf,
    /// Gait files, one reference per gait.
    #[arg(long, num_args = 1.., required = true)]
    gaits: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Nominal parameters that identification starts from; defaults to the built-in set.
    #[arg(long)]
    nominal: Option<PathBuf>,
    /// Rollout configuration JSON.
    #[arg(long)]
    rollout: Option<PathBuf>,
    /// Seed of the measurement noise; overrides the rollout configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Standard deviation of head-position noise, mm.
    #[arg(long, default_value_t = 0.0)]
    noise_pos_mm: f64,
    /// Standard deviation of joint-angle noise, degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_joint_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Internal,
    External,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InternalRewardArg {
    Cpg,
    TrajectoryL2,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// Reference directory written by make-reference.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long, value_enum, default_value_t = PhaseArg::Both)]
    phase: PhaseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Identified parameters JSON.
    #[arg(long)]
    out: PathBuf,
    /// Training log; defaults to `<out stem>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Run manifest; defaults to `<out stem>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Nominal parameters that define the search box; defaults to the reference directory's.
    #[arg(long)]
    nominal: Option<PathBuf>,
    /// Starting parameters; defaults to the nominal ones.
    #[arg(long)]
    start: Option<PathBuf>,
    /// PPO configuration JSON.
    #[arg(long)]
    ppo: Option<PathBuf>,
    /// Overrides the PPO iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Worker threads for rollouts; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Identify one actuator triple per joint instead of a shared one.
    #[arg(long)]
    per_joint: bool,
    #[arg(long, value_enum, default_value_t = InternalRewardArg::Cpg)]
    internal_reward: InternalRewardArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference trajectory CSV.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Parameter files to score.
    #[arg(long, num_args = 1.., required = true)]
    params: Vec<PathBuf>,
    /// Gait of the reference; defaults to `<ref stem>.gait.json` beside it.
    #[arg(long)]
    gait: Option<PathBuf>,
    /// Robot model; defaults to `model.json` beside the reference, else the built-in robot.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Rollout configuration; defaults to `rollout.json` beside the reference.
    #[arg(long)]
    rollout: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_normal_clamp: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Parameters; defaults to the built-in nominal set.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    gait: PathBuf,
    /// Rollout configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output trajectory CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FrictionArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Parameters; defaults to the built-in nominal set.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Normal load, N; defaults to one module's weight.
    #[arg(long)]
    normal_load_n: Option<f64>,
    /// Largest slip speed, m/s.
    #[arg(long, default_value_t = 0.1)]
    v_max: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeReference(a) => commands::make_reference(&a),
        Command::Identify(a) => commands::identify(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Rollout(a) => commands::rollout(&a),
        Command::DumpFrictionCurve(a) => commands::dump_friction_curve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sidewinder: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
