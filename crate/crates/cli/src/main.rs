//! `humimic`: retarget mocap to a robot, solve IK, smooth, extract style
//! features, and train or benchmark the adversarial critic.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FilterOrder;

#[derive(Debug, Parser)]
#[command(
    name = "humimic",
    version,
    about = "Motion retargeting and adversarial style critic toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Validate all inputs without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BVH → key-point targets → IK → smoothed robot motion.
    Retarget(RetargetArgs),
    /// Solve IK for a saved targets file.
    Ik(IkArgs),
    /// Smooth and/or resample a robot motion CSV.
    Filter(FilterArgs),
    /// Extract transition style features from a robot motion CSV.
    Features(FeaturesArgs),
    /// Adversarial loss-family benchmark on toy or motion datasets.
    Bench(BenchArgs),
    /// Train a critic on reference vs generated feature files.
    TrainCritic(TrainCriticArgs),
}

#[derive(Debug, Args)]
pub struct RetargetArgs {
    #[arg(long)]
    pub bvh: Option<PathBuf>,
    #[arg(long)]
    pub robot: Option<PathBuf>,
    #[arg(long)]
    pub binding: Option<PathBuf>,
    /// BVH length units to meters.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, value_enum)]
    pub source_axes: Option<Axes>,
    #[arg(long, value_enum)]
    pub filter_order: Option<FilterOrder>,
    /// EMA smoothing factor in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output frame rate.
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Axes {
    ZUp,
    YUp,
}

#[derive(Debug, Args)]
pub struct IkArgs {
    /// Targets JSON written by `retarget`.
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub robot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub motion: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub motion: PathBuf,
    #[arg(long)]
    pub robot: Option<PathBuf>,
    /// Future frames per transition.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// gauss2, ring8 or motion_features:<manifest>.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Comma-separated subset of bce,w1,w1_soft.
    #[arg(long)]
    pub losses: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Inclusive range `a..b` or a comma list.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainCriticArgs {
    /// Reference features CSV.
    #[arg(long)]
    pub real: PathBuf,
    /// Generated features CSV.
    #[arg(long)]
    pub fake: PathBuf,
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// Comma-separated hidden widths.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
