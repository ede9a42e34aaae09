//! `pano2video` command-line front end.
//!
//! Angles are taken in degrees and converted to radians here. Exit codes:
//! 0 on success, 2 for invalid arguments or inputs, 3 when a run fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Worker thread count for the parallel kernels.
const THREADS_ENV: &str = "PANO2VIDEO_THREADS";
/// Directory for cached raymap volumes.
const CACHE_ENV: &str = "PANO2VIDEO_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "pano2video", version, about = "Panorama-to-video geometry, sampling and metrics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert between an equirectangular panorama and a perspective view.
    Project(ProjectArgs),
    /// Cut keyframe pairs from a panorama.
    Keyframes(KeyframesArgs),
    /// Build a camera trajectory.
    Trajectory(TrajectoryArgs),
    /// Write the Plücker raymap volume of a pose list.
    Raymap(RaymapArgs),
    /// Run a diffusion sampler.
    Sample(SampleArgs),
    /// Compute image and consistency metrics.
    Eval(EvalArgs),
    /// Run the staged pipeline from a TOML config.
    Pipeline(PipelineArgs),
    /// Score a grid of spatial-weight temperatures.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Direction {
    Pano2persp,
    Persp2pano,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "pano2persp")]
    direction: Direction,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    yaw: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    /// Defaults to the value implied by the output aspect ratio.
    #[arg(long)]
    vfov: Option<f64>,
    /// Perspective size for pano2persp, panorama canvas size for persp2pano.
    #[arg(long, value_parser = commands::parse_size)]
    out_size: (usize, usize),
    /// Also write the visibility (pano2persp) or coverage (persp2pano) mask.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 8, value_parser = commands::parse_bit_depth)]
    bit_depth: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PairMode {
    Neighbor,
    Walkin,
}

#[derive(Args, Debug)]
struct KeyframesArgs {
    /// Equirectangular panorama PNG.
    #[arg(long)]
    input: PathBuf,
    /// Panorama distance map (PFM or 16-bit PNG); required for walk-in.
    #[arg(long)]
    depth: Option<PathBuf>,
    /// Metric depth of the PNG full scale.
    #[arg(long)]
    max_depth: Option<f64>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "neighbor")]
    mode: PairMode,
    #[arg(long, default_value_t = 4)]
    views: usize,
    #[arg(long, default_value_t = 0.25)]
    overlap: f64,
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    #[arg(long, default_value_t = 0.8)]
    walk_ratio: f64,
    /// View direction of the walk-in pair.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    yaw: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long, value_parser = commands::parse_size, default_value = "256x256")]
    out_size: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrajectoryMode {
    Star,
    Interpolate,
    Upsample,
}

#[derive(Args, Debug)]
struct TrajectoryArgs {
    #[arg(long, value_enum)]
    mode: TrajectoryMode,
    /// Keyposes for interpolate and upsample.
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Panorama distance map for star.
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long)]
    max_depth: Option<f64>,
    #[arg(long)]
    output: PathBuf,
    /// Poses per segment, endpoints included (interpolate).
    #[arg(long, default_value_t = 16)]
    frames: usize,
    /// Largest rotation between neighbours, degrees (upsample).
    #[arg(long, default_value_t = 5.0)]
    max_rotation: f64,
    /// Largest translation between neighbours, meters (upsample).
    #[arg(long, default_value_t = 0.25)]
    max_translation: f64,
    /// Number of star directions.
    #[arg(long, default_value_t = 8)]
    directions: usize,
    /// Clearance kept from the depth boundary, meters.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Star centre `x,y,z` in meters.
    #[arg(long, value_parser = commands::parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    center: [f64; 3],
    /// Field of view recorded in the star poses' intrinsics.
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    #[arg(long, value_parser = commands::parse_size, default_value = "256x256")]
    out_size: (usize, usize),
}

#[derive(Args, Debug)]
struct RaymapArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Raymap grid; the pose intrinsics are rescaled to it.
    #[arg(long, value_parser = commands::parse_size, default_value = "32x32")]
    out_size: (usize, usize),
    #[arg(long)]
    normalized: bool,
    /// `.plkr` volume; the JSON sidecar goes next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SampleMode {
    Panorama,
    Video,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    Literal,
    Blend,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum)]
    mode: SampleMode,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 4.7)]
    tau_t: f64,
    #[arg(long, default_value_t = 1.68)]
    tau_q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `stub`, `oracle:<png or frame directory>` or `external:<host:port | socket path>`.
    #[arg(long, default_value = "stub")]
    denoiser: String,
    #[arg(long, default_value_t = pano2video::sampler::DEFAULT_BETA_MIN)]
    beta_min: f64,
    #[arg(long, default_value_t = pano2video::sampler::DEFAULT_BETA_MAX)]
    beta_max: f64,
    /// Deterministic reverse steps (σ = 0).
    #[arg(long)]
    zero_variance: bool,
    /// Panorama: the known panorama. Video: unused.
    #[arg(long)]
    known: Option<PathBuf>,
    /// Panorama: white where the panorama is known.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Panorama: steps between quarter-turn shifts.
    #[arg(long)]
    cycle_interval: Option<usize>,
    /// Video: frame poses, first and last are the anchors.
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    /// Video: white where the target keyframe is unknown.
    #[arg(long)]
    target_mask: Option<PathBuf>,
    /// Video: PLKR volume passed to the denoiser.
    #[arg(long)]
    raymaps: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "literal")]
    weight_mode: WeightArg,
    /// Length of the keyframe feature vectors handed to the denoiser.
    #[arg(long, default_value_t = 64)]
    feature_dim: usize,
    /// Panorama: output PNG. Video: output directory of numbered frames.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = commands::parse_bit_depth)]
    bit_depth: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Psnr,
    Ssim,
    Mtsed,
    Fvd,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Repeatable.
    #[arg(long, value_enum, required = true)]
    metric: Vec<MetricArg>,
    /// Reference PNG directory (psnr, ssim).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Candidate PNG directory, file names matching the reference.
    #[arg(long)]
    candidate: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
    /// JSON list of correspondence sets, one per consecutive frame pair (mtsed).
    #[arg(long)]
    matches: Option<PathBuf>,
    /// Frame poses the correspondences refer to (mtsed).
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long, default_value_t = pano2video::metrics::DEFAULT_T_ERROR)]
    t_error: f64,
    #[arg(long, default_value_t = pano2video::metrics::DEFAULT_T_MATCH)]
    t_match: usize,
    /// FEAT file of real video features (fvd).
    #[arg(long)]
    real: Option<PathBuf>,
    /// FEAT file of generated video features (fvd).
    #[arg(long)]
    generated: Option<PathBuf>,
    /// Directory for report.csv and report.json; the CSV also goes to stdout.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of project,keyframes,trajectory,raymaps,sample,eval.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `start:stop:step` in meters.
    #[arg(long, default_value = "1:9:2")]
    tau_t: String,
    /// `start:stop:step` in radians.
    #[arg(long, default_value = "0.5:2.5:0.5")]
    tau_q: String,
    /// Report path; the format follows the extension unless --format is given.
    #[arg(long)]
    output: PathBuf,
    /// csv, json or svg.
    #[arg(long)]
    format: Option<String>,
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| commands::Failure::invalid(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::runtime(e.to_string()))
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Project(a) => commands::project(a),
        Command::Keyframes(a) => commands::keyframes(a),
        Command::Trajectory(a) => commands::trajectory(a),
        Command::Raymap(a) => commands::raymap(a, cache_dir()),
        Command::Sample(a) => commands::sample(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pipeline(a) => commands::pipeline(a, cache_dir()),
        Command::Sweep(a) => commands::sweep(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
