use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vrcnn_core::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "vrcnn",
    version,
    about = "Train, apply, and evaluate compression artifact reduction networks"
)]
pub struct Cli {
    /// Also write a machine-readable JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub report: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a tiled corpus from a directory of PGM images and train a network.
    Train(TrainArgs),
    /// Filter an image or YUV sequence with a trained model.
    Apply(ApplyArgs),
    /// Compress an image or YUV sequence with the DCT codec proxy.
    Degrade(DegradeArgs),
    /// PSNR before and after filtering, against the original.
    Eval(EvalArgs),
    /// Bjontegaard delta rate and PSNR between rate-distortion curves.
    Bdrate(BdrateArgs),
    /// Per-layer parameter breakdown, model size, and MACs per frame.
    Params(ParamsArgs),
    /// Time per-frame filtering on synthetic frames.
    Bench(BenchArgs),
    /// Write procedural test images as PGM files.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Vrcnn,
    Arcnn,
    Vdsr,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Vrcnn => ModelKind::Vrcnn,
            ModelArg::Arcnn => ModelKind::Arcnn,
            ModelArg::Vdsr => ModelKind::Vdsr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Pgm,
    Raw,
    Yuv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    Y,
    U,
    V,
    All,
}

/// Input format and geometry shared by every command that reads pixels.
#[derive(Clone, Debug, Args)]
pub struct FormatOpts {
    /// File format; guessed from the extension when omitted (.pgm, .yuv, anything else raw).
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Luma width, required for raw and YUV input.
    #[arg(long)]
    pub width: Option<usize>,
    /// Luma height, required for raw and YUV input.
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "vrcnn")]
    pub model: ModelArg,
    #[arg(long, value_parser = ["22", "27", "32", "37"])]
    pub qp: String,
    /// Directory of original images (*.pgm).
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Preset name (qp22, qp27, qp32, qp37, smoke) or a JSON file of
    /// overrides applied on top of the QP preset.
    #[arg(long)]
    pub config: Option<String>,
    /// Model file to fine-tune from.
    #[arg(long, value_name = "FILE")]
    pub init_from: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training log path; defaults to the model path with `.log.json` appended.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long, value_name = "FILE")]
    pub model_file: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub format: FormatOpts,
    /// Planes to filter in YUV input; the rest are copied.
    #[arg(long, value_enum, default_value = "all")]
    pub plane: PlaneArg,
    /// Worker threads for filtering planes concurrently.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub qp: i32,
    #[command(flatten)]
    pub format: FormatOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model_file: PathBuf,
    #[arg(long)]
    pub degraded: PathBuf,
    #[arg(long)]
    pub original: PathBuf,
    #[command(flatten)]
    pub format: FormatOpts,
    /// Per-pair results as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BdrateArgs {
    /// Anchor curve CSV (qp,bitrate,psnr).
    #[arg(long, required_unless_present = "table")]
    pub anchor: Option<PathBuf>,
    /// Test curve CSV (qp,bitrate,psnr).
    #[arg(long, required_unless_present = "table")]
    pub test: Option<PathBuf>,
    /// Manifest CSV with columns class,sequence,plane,anchor,test; curve
    /// paths are relative to the manifest.
    #[arg(long, conflicts_with_all = ["anchor", "test"])]
    pub table: Option<PathBuf>,
    /// Piecewise cubic interpolation, which also accepts curves without exactly four points.
    #[arg(long)]
    pub piecewise: bool,
    /// Table rows as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long, value_enum, default_value = "vrcnn")]
    pub model: ModelArg,
    #[arg(long, default_value_t = 176)]
    pub width: usize,
    #[arg(long, default_value_t = 144)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model files to time; repeat to compare.
    #[arg(long = "model-file", value_name = "FILE")]
    pub model_files: Vec<PathBuf>,
    /// Built-in architectures with He-initialized weights; repeat to compare.
    #[arg(long, value_enum)]
    pub model: Vec<ModelArg>,
    #[arg(long, default_value_t = 176)]
    pub width: usize,
    #[arg(long, default_value_t = 144)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub frames: usize,
    /// Worker threads for filtering the three planes of a frame concurrently.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    #[arg(long, default_value_t = 140)]
    pub width: usize,
    #[arg(long, default_value_t = 105)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
