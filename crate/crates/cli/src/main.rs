//! `morpi` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use morpi::calib::CalibMode;
use morpi::eval::{Dim, EntryFilter, Split};
use morpi::morpi::MorpiMode;
use morpi::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "morpi", version, about = "Pure-inertial dead reckoning: strapdown INS, periodic-motion estimator, error model")]
struct Cli {
    /// TOML file with `gravity`, `[peaks]`, `[peaks.stationary]` and `[calib]` settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Strapdown endpoint errors for every selected recording.
    Ins(InsArgs),
    /// Periodic-motion endpoint errors with a trained gain.
    Morpi(MorpiArgs),
    /// Train a gain on the selected recordings and write it to `--out`.
    Gain(GainArgs),
    /// Closed-form error curves on a time grid.
    Errmodel(ErrmodelArgs),
    /// Generate a synthetic trajectory and its IMU log.
    Simulate(SimulateArgs),
    /// All strapdown and periodic-motion tables of a manifest.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Clone)]
struct Selection {
    /// JSON run manifest.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    trajectory: Option<String>,
    #[arg(long)]
    device: Option<String>,
    #[arg(long)]
    period: Option<String>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    split: SplitArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl Selection {
    fn filter(&self) -> EntryFilter {
        EntryFilter {
            trajectory: self.trajectory.clone(),
            device: self.device.clone(),
            period: self.period.clone(),
            split: match self.split {
                SplitArg::Train => Some(Split::Train),
                SplitArg::Test => Some(Split::Test),
                SplitArg::All => None,
            },
        }
    }
}

#[derive(Args, Debug)]
struct InsArgs {
    #[command(flatten)]
    select: Selection,
    /// 2D or 3D.
    #[arg(long, default_value = "3d")]
    dim: Dim,
    /// RD, GC or GAC.
    #[arg(long, default_value = "rd")]
    calib: CalibMode,
    /// Table output (`.json` for JSON, otherwise CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each run's navigation solution into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MorpiArgs {
    #[command(flatten)]
    select: Selection,
    /// A (accelerometer y) or G (gyroscope z).
    #[arg(long)]
    mode: MorpiMode,
    #[arg(long, default_value = "gc")]
    calib: CalibMode,
    /// Gain file written by `morpi gain`.
    #[arg(long)]
    gain: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each run's segment track into this directory.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GainArgs {
    #[command(flatten)]
    select: Selection,
    #[arg(long)]
    mode: MorpiMode,
    /// Gain file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ErrmodelArgs {
    /// TOML file with sensor biases, initial velocity error and segment layout.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Sensor preset (mpu6500/s6, lsm6dsl/s8, ideal); overrides the inputs file.
    #[arg(long)]
    preset: Option<String>,
    /// Curve output; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Trajectory spec (JSON, or TOML by extension).
    #[arg(long)]
    spec: PathBuf,
    /// Sensor preset applied to the ideal readings.
    #[arg(long, default_value = "ideal")]
    sensor: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives `imu.csv` and `truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Parse => 3,
        ErrorClass::Computation => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ins(a) => commands::ins(&a, &cfg),
        Command::Morpi(a) => commands::morpi(&a, &cfg),
        Command::Gain(a) => commands::gain(&a, &cfg),
        Command::Errmodel(a) => commands::errmodel(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Evaluate(a) => commands::evaluate(&a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
