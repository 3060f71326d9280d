use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evhand_core::event::DEFAULT_DELTA_T_US;

#[derive(Debug, Parser)]
#[command(name = "evhand", version, about = "Stereo event-camera hand pose pipelines")]
pub struct Cli {
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic stereo event dataset with ground truth.
    Simulate(SimulateArgs),
    /// Encode event windows into LNES surfaces.
    Encode(EncodeArgs),
    /// Lift depth-camera keypoints to 3D, fill gaps and project to both views.
    Annotate(AnnotateArgs),
    /// Triangulate and iteratively refine 3D poses.
    Solve(SolveArgs),
    /// Score predicted poses against ground truth.
    Eval(EvalArgs),
    /// Build normalised gesture feature sequences.
    Features(FeaturesArgs),
    /// Re-run a saved `run.toml`.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HandsArg {
    Bimanual,
    Single,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Base simulator config (TOML); flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long)]
    pub frame_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub hands: Option<HandsArg>,
    #[arg(long)]
    pub articulation_mm: Option<f64>,
    #[arg(long)]
    pub translation_mm: Option<f64>,
    /// Background events per pixel per second.
    #[arg(long)]
    pub noise_rate: Option<f64>,
    /// Pixels of motion per event.
    #[arg(long)]
    pub contrast_step: Option<f64>,
    /// `k1,k2,p1,p2,k3` for both event cameras.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub distortion: Option<Vec<f64>>,
    /// `none`, `full` or `random:COUNT:RADIUS`.
    #[arg(long)]
    pub holes: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Sum,
    Latest,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub format: FormatArg,
    /// Sensor width, CSV only.
    #[arg(long)]
    pub width: Option<u16>,
    /// Sensor height, CSV only.
    #[arg(long)]
    pub height: Option<u16>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA_T_US)]
    pub delta_t_us: u64,
    #[arg(long, value_enum, default_value = "sum")]
    pub mode: ModeArg,
    /// Spacing of window ends; defaults to the window length.
    #[arg(long)]
    pub stride_us: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Depth-camera keypoints CSV.
    #[arg(long)]
    pub kp2d: PathBuf,
    /// Directory of `NNNNNN.dpm` depth maps.
    #[arg(long)]
    pub depth_dir: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the depth hole-filling window, px.
    #[arg(long, default_value_t = evhand_core::annotation::DEFAULT_FILL_WINDOW)]
    pub window: usize,
    /// Longest gap (frames) filled by interpolation.
    #[arg(long, default_value_t = evhand_core::annotation::DEFAULT_MAX_GAP)]
    pub max_gap: usize,
    /// Scenario name recorded in the output, e.g. `normal bimanual`.
    #[arg(long)]
    pub scenario: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Labels,
    SoftArgmax,
    Argmax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PredictorArg {
    GaussNewton,
    Oracle,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Annotation file whose stereo labels are rendered as heatmaps.
    #[arg(long, conflicts_with = "heatmaps", required_unless_present = "heatmaps")]
    pub annotation: Option<PathBuf>,
    /// Heatmap directory (`left/`, `right/`, `frames.txt`).
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Initial estimate; defaults to `labels` for annotations and
    /// `soft-argmax` for heatmaps.
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    /// One ratio for every iteration, or one per iteration.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub step_ratio: Vec<f64>,
    #[arg(long)]
    pub no_backtracking: bool,
    #[arg(long, default_value_t = 8)]
    pub max_halvings: u32,
    /// Patch half-width, heatmap px; defaults to 12 for annotations and 8
    /// for heatmaps.
    #[arg(long)]
    pub patch_radius: Option<usize>,
    /// Soft-argmax temperature; defaults to 1.0 for annotations and 0.1
    /// for heatmaps.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// `oracle` steps towards the annotation's 3D poses.
    #[arg(long, value_enum, default_value = "gauss-newton")]
    pub predictor: PredictorArg,
    /// Heatmap size over image size (annotation input).
    #[arg(long, default_value_t = 0.25)]
    pub scale: f64,
    /// Gaussian std-dev of rendered heatmaps, heatmap px.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Std-dev of noise added to rendered peaks, image px.
    #[arg(long, default_value_t = 0.0)]
    pub peak_noise_px: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the heatmaps used in the `--heatmaps` layout.
    #[arg(long)]
    pub dump_heatmaps: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted annotation; repeat alongside `--gt`.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    /// Ground-truth annotation, paired with `--pred` in order.
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = evhand_core::metrics::DEFAULT_PCK_THRESHOLDS)]
    pub pck_thresholds: usize,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Annotation files with stereo labels; `meta label N` sets the class.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per sequence (0 = one sequence per input).
    #[arg(long, default_value_t = 0)]
    pub window_frames: usize,
    /// Report leave-one-out centroid-classifier accuracy.
    #[arg(long)]
    pub classify: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub config: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
