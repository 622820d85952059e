use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tweezer_readout::reconstruct::Mode;
use tweezer_readout::EmissionChannel;

#[derive(Parser, Debug)]
#[command(
    name = "tweezer",
    version,
    about = "Atom detection for optical-tweezer fluorescence images"
)]
pub struct Cli {
    /// Log level: error, warn, info, debug or trace (RUST_LOG takes precedence)
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render noisy frames and ground-truth sidecars from a scene description
    Simulate(SimulateArgs),
    /// Fit grid, background, PSFs, projectors and threshold from exemplary frames
    Calibrate(CalibrateArgs),
    /// Reconstruct emissions and occupancy for one frame
    Reconstruct(ReconstructArgs),
    /// Time the reconstruction modes across array sizes
    Bench(BenchArgs),
    /// Predict accelerator latency for a site count
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scene JSON; the built-in 10x10 scene when omitted
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Number of frames
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Overrides the scene seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Glob pattern or directory of PGM frames
    #[arg(long)]
    pub frames: String,
    /// Calibration config JSON; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kernel_size: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub min_images: Option<usize>,
    #[arg(long)]
    pub occupancy_prefilter: Option<f64>,
    /// raw or normalized
    #[arg(long)]
    pub threshold_channel: Option<EmissionChannel>,
    #[arg(long)]
    pub subtract_background: Option<bool>,
    #[arg(long)]
    pub neighbor_aware: Option<bool>,
    /// Also write projectors.bin, the raw f32 projector blob
    #[arg(long)]
    pub projector_blob: bool,
    /// Output directory; the artifact is written as calibration.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// baseline, optimized or dataflow
    #[arg(long, default_value = "optimized")]
    pub mode: Mode,
    /// Calibration artifact JSON
    #[arg(long)]
    pub calibration: PathBuf,
    /// PGM frame
    #[arg(long)]
    pub image: PathBuf,
    /// Emission matrix format
    #[arg(long, value_enum, default_value = "csv")]
    pub format: EmissionFormat,
    /// Channel written to the emission CSV and used for thresholding;
    /// defaults to the artifact's calibrated channel
    #[arg(long)]
    pub channel: Option<EmissionChannel>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub subtract_background: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write per-site pipeline traces (dataflow mode only)
    #[arg(long)]
    pub emit_trace: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Bench config JSON; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated array side lengths
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Comma-separated modes
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<Mode>>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Number of atom sites
    #[arg(long)]
    pub atoms: u64,
    /// Latency model JSON; the fit of the reported accelerator figures when omitted
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Optional output directory for prediction.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}
