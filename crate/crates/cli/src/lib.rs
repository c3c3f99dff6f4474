//! Command-line front end: scenario rendering with device simulation,
//! psychophysics runs with simulated observers, and wire-protocol tools.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod artifact;
pub mod experiments;
pub mod protocol_cmd;
pub mod render;

pub const TOOL: &str = "quadstretch";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure classes, each with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 1: bad flags or arguments, or an output would be overwritten.
    #[error("{0}")]
    Usage(String),
    /// Exit 2: unreadable or invalid input files and configs.
    #[error("{0}")]
    Input(String),
    /// Exit 3: a run finished but broke its contract (non-convergent
    /// observer, decoder panic, device limit).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Skin-stretch haptics toolkit: render, simulate, measure")]
pub struct Cli {
    /// TOML parameter file; defaults apply to every missing key.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random draw; recorded in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Allow replacing existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a hand trajectory through a scenario, renderer and device model.
    Render(RenderArgs),
    /// Run a JND staircase with a simulated observer.
    Jnd(JndArgs),
    /// Run a stimulus identification session with a simulated observer.
    Confusion(ConfusionArgs),
    /// Wire-protocol tools.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeviceKind {
    Quadstretcher,
    Squeezer,
}

impl DeviceKind {
    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::Quadstretcher => "quadstretcher",
            DeviceKind::Squeezer => "squeezer",
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Trajectory CSV: t,px,py,pz[,vx,vy,vz][,aux].
    #[arg(long, value_name = "FILE")]
    pub trajectory: PathBuf,

    /// push-button, rotate-knob, trigger-sprayer, rubber-band, fishing-rod or
    /// tennis-racket.
    #[arg(long)]
    pub scenario: String,

    #[arg(long, value_enum, default_value_t = DeviceKind::Quadstretcher)]
    pub device: DeviceKind,

    /// all-contract or all-expand for 1-DoF scenarios;
    /// contract-towards-force or contract-away-from-force for 3-DoF ones.
    /// Defaults to all-contract and contract-towards-force.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObserverKind {
    /// Gaussian noise at the configured sigma.
    Reference,
    /// Vanishing noise.
    Noiseless,
    /// Answers at random.
    Guessing,
}

#[derive(Debug, Args)]
pub struct ObserverArgs {
    #[arg(long, value_enum, default_value_t = ObserverKind::Reference)]
    pub observer: ObserverKind,

    /// Override the configured noise sigma, mm.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct JndArgs {
    /// Side letter: D, R, V or L.
    #[arg(long)]
    pub side: String,

    /// contraction or expansion.
    #[arg(long = "type", value_name = "TYPE")]
    pub stretch_type: String,

    /// Reference magnitude, mm.
    #[arg(long, default_value_t = quadstretch::psychophysics::JND_REFERENCE)]
    pub reference: f64,

    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub runs: u64,

    #[command(flatten)]
    pub observer: ObserverArgs,
}

#[derive(Debug, Args)]
pub struct ConfusionArgs {
    /// 1: sides × types, 2: sides (contraction), 3: sides (expansion),
    /// 4: contraction vs expansion.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub session: u8,

    /// Presentations per stimulus.
    #[arg(long, default_value_t = 10)]
    pub reps: u32,

    #[command(flatten)]
    pub observer: ObserverArgs,
}

#[derive(Debug, Subcommand)]
pub enum ProtocolCommand {
    /// Print a frame dump as annotated hex.
    Dump {
        file: PathBuf,
    },
    /// Feed a frame dump through the loopback link into a simulated device.
    Replay {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = DeviceKind::Quadstretcher)]
        device: DeviceKind,
    },
    /// Throw random buffers at the decoder and report what it made of them.
    Fuzz {
        #[arg(long, default_value_t = 1_000_000)]
        count: u64,
        /// Longest buffer, bytes.
        #[arg(long, default_value_t = 64)]
        max_len: usize,
    },
}

/// Parses arguments and runs the command, mapping failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{TOOL}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = artifact::Context::load(cli)?;
    match &cli.command {
        Command::Render(args) => render::cmd_render(&ctx, args),
        Command::Jnd(args) => experiments::cmd_jnd(&ctx, args),
        Command::Confusion(args) => experiments::cmd_confusion(&ctx, args),
        Command::Protocol(cmd) => protocol_cmd::cmd_protocol(&ctx, cmd),
    }
}
