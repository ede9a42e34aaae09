//! Stage graph tying the modules into a reproducible run.
//!
//! Stages run in order: project, keyframes, trajectory, raymaps, sample,
//! eval. Unselected stages that a selected stage depends on are recomputed
//! in memory without writing anything, so any subset can run on its own.

mod config;
mod manifest;
mod report;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    EvalConfig, InputConfig, KeyframeMode, KeyframesConfig, Metric, PipelineConfig, ProjectConfig, RaymapConfig,
    SamplerConfig, Stage, TrajectoryConfig,
};
pub use manifest::{sha256_bytes, sha256_file, FileRecord, RunManifest, StageRecord, MANIFEST_FILE};
pub use report::{emit_report, emit_sweep, format_value, render_report, render_sweep, ReportFormat, ReportRow};
pub use sweep::{parse_grid, tau_sweep, SweepProblem, TauSweep};

use crate::io::{self, BitDepth, IoError, PoseRecord};
use crate::keyframes::{build_neighboring_pairs, build_walkin_pair, window_depth, KeyframePair, PairRelation};
use crate::metrics::{
    feature_distribution, frechet_distance, mtsed_sequence, psnr, ssim, synthetic_correspondences,
    synthetic_frame_features, video_feature_stack,
};
use crate::projection::{render_from_panorama, split_panorama, ViewWindow};
use crate::raymap::{scale_intrinsics, stack_raymaps, write_plkr, RaymapSidecar, RaymapVolume};
use crate::sampler::{
    anchors_from_pair, make_schedule, spatial_diffusion_sample, stub_features, Denoiser, ExternalDenoiser, Latent,
    NoiseSchedule, OracleDenoiser, SpatialConfig, StubDenoiser, VideoRequest,
};
use crate::scene::SyntheticRoom;
use crate::trajectory::interpolate_poses;
use crate::types::{CameraPose, DepthMap, PanoramaImage, Raster};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("stage {} failed: {source}", .stage.name())]
    Stage {
        stage: Stage,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// Bad configuration or inputs, as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Validation(_) | PipelineError::MissingInput(_) => true,
            PipelineError::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<IoError> for PipelineError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::File { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                PipelineError::MissingInput(path)
            }
            IoError::Core(c) => PipelineError::Validation(c.to_string()),
            e => PipelineError::Runtime(e.to_string()),
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    crate::keyframes::KeyframeError,
    crate::projection::ProjectionError,
    crate::raymap::RaymapError,
    crate::sampler::SamplerError,
    crate::metrics::MetricsError,
    crate::trajectory::TrajectoryError,
    crate::types::CoreError
);

/// Environment-level settings that do not change results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Raymap volumes are cached here, keyed by a hash of their sidecar.
    pub cache_dir: Option<PathBuf>,
}

struct Scene {
    pano: PanoramaImage,
    depth: Option<DepthMap>,
    room: Option<SyntheticRoom>,
}

struct PairRun {
    pair: KeyframePair,
    poses: Vec<CameraPose>,
    truth: Option<Vec<Raster>>,
    frames: Option<Vec<Raster>>,
}

fn pair_dir(i: usize) -> String {
    format!("pair_{i:03}")
}

fn load_scene(cfg: &PipelineConfig, inputs: &mut Vec<FileRecord>) -> Result<Scene, PipelineError> {
    let i = &cfg.input;
    if i.synthetic_room {
        let room = SyntheticRoom::default();
        let c = Vector3::zeros();
        return Ok(Scene {
            pano: room.render_panorama(i.panorama_width_px, &c)?,
            depth: Some(room.depth_panorama(i.panorama_width_px, &c)?),
            room: Some(room),
        });
    }
    let path = i.panorama.as_ref().expect("validated");
    inputs.push(FileRecord {
        path: path.clone(),
        sha256: sha256_file(path)?,
    });
    let pano = PanoramaImage::new(io::read_png(path)?).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let depth = match &i.depth {
        Some(p) => {
            inputs.push(FileRecord {
                path: p.clone(),
                sha256: sha256_file(p)?,
            });
            Some(io::read_depth(p, i.max_depth_meters)?)
        }
        None => None,
    };
    Ok(Scene { pano, depth, room: None })
}

fn build_pairs(cfg: &PipelineConfig, scene: &Scene) -> Result<Vec<KeyframePair>, PipelineError> {
    let p = &cfg.project;
    let hfov = p.hfov_degrees.to_radians();
    let mut pairs = match cfg.keyframes.mode {
        KeyframeMode::Neighbor => {
            build_neighboring_pairs(&scene.pano, p.views, p.overlap, hfov, p.width_px, p.height_px)?
        }
        KeyframeMode::Walkin => {
            let k = &cfg.keyframes;
            let window = ViewWindow::with_aspect(
                k.yaw_degrees.to_radians(),
                k.pitch_degrees.to_radians(),
                hfov,
                p.width_px,
                p.height_px,
            )?;
            let pose = window.pose(Vector3::zeros());
            let intr = window.intrinsics();
            let depth = match (&scene.room, &scene.depth) {
                (Some(room), _) => room.view_depth(&pose, &intr)?,
                (None, Some(d)) => window_depth(d, &pose, &intr)?,
                (None, None) => return Err(PipelineError::Validation("walk-in keyframes need a depth map".into())),
            };
            vec![build_walkin_pair(&scene.pano, &depth, &window, k.walk_ratio, k.depth_mode)?]
        }
    };
    if let Some(m) = cfg.keyframes.max_pairs {
        pairs.truncate(m);
    }
    Ok(pairs)
}

/// Frames with a known answer: panorama renders for pure rotations, room
/// renders for translated cameras.
fn ground_truth(scene: &Scene, pair: &KeyframePair, poses: &[CameraPose]) -> Result<Option<Vec<Raster>>, PipelineError> {
    let k = &pair.intrinsics;
    match (pair.relation, &scene.room) {
        (PairRelation::Neighboring, _) => Ok(Some(
            poses.par_iter().map(|p| render_from_panorama(&scene.pano, &p.matrix(), k)).collect(),
        )),
        (PairRelation::WalkIn, Some(room)) => Ok(Some(
            poses.iter().map(|p| room.render_view(p, k)).collect::<Result<_, _>>()?,
        )),
        (PairRelation::WalkIn, None) => Ok(None),
    }
}

fn pair_seed(seed: u64, pair: usize) -> u64 {
    let h = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update((pair as u64).to_le_bytes())
        .finalize();
    u64::from_le_bytes(h[..8].try_into().unwrap())
}

fn schedule(cfg: &SamplerConfig) -> Result<NoiseSchedule, PipelineError> {
    let s = make_schedule(cfg.steps, cfg.beta_min, cfg.beta_max)?;
    Ok(if cfg.zero_variance { s.zero_variance() } else { s })
}

fn raymap_volume(cfg: &PipelineConfig, run: &PairRun) -> Result<(RaymapVolume, RaymapSidecar), PipelineError> {
    let size = (cfg.raymap.width_px, cfg.raymap.height_px);
    let k = scale_intrinsics(&run.pair.intrinsics, size);
    let mut vol = stack_raymaps(&run.poses, &k, size)?;
    if cfg.raymap.normalized {
        vol.frames = vol.frames.iter().map(|f| f.normalized()).collect();
    }
    let sidecar = RaymapSidecar {
        width: size.0,
        height: size.1,
        frames: run.poses.len(),
        channels_per_frame: 6,
        normalized: cfg.raymap.normalized,
        intrinsics: k,
        poses: run.poses.iter().map(|p| PoseRecord::new(p, k)).collect(),
    };
    Ok((vol, sidecar))
}

fn make_denoiser(cfg: &SamplerConfig, truth: Option<&[Raster]>) -> Result<Box<dyn Denoiser>, PipelineError> {
    match cfg.denoiser.as_str() {
        "stub" => Ok(Box::new(StubDenoiser)),
        "oracle" => {
            let truth = truth.ok_or_else(|| {
                PipelineError::Validation("the oracle denoiser needs ground-truth frames for this pair".into())
            })?;
            Ok(Box::new(OracleDenoiser::new(truth.iter().map(Latent::from_raster).collect())))
        }
        other => {
            let addr = other.strip_prefix("external:").expect("validated");
            Ok(Box::new(ExternalDenoiser::connect(addr)?))
        }
    }
}

fn sample_pair(cfg: &PipelineConfig, run: &PairRun, index: usize) -> Result<Vec<Raster>, PipelineError> {
    let (vol, _) = raymap_volume(cfg, run)?;
    let denoiser = make_denoiser(&cfg.sampler, run.truth.as_deref())?;
    let anchors = anchors_from_pair(&run.pair, run.poses.len())?;
    let dim = cfg.sampler.feature_dim;
    let (fs, ft) = (stub_features(&run.pair.source.raster, dim), stub_features(&run.pair.target.raster, dim));
    let req = VideoRequest {
        frame_poses: &run.poses,
        anchors: &anchors,
        raymaps: Some(&vol),
        features: Some((&fs, &ft)),
    };
    let sc = SpatialConfig {
        tau_t: cfg.sampler.tau_t_meters,
        tau_q: cfg.sampler.tau_q_radians,
        mode: cfg.sampler.mode,
        seed: pair_seed(cfg.seed, index),
    };
    let out = spatial_diffusion_sample(denoiser.as_ref(), &schedule(&cfg.sampler)?, &req, &sc)?;
    Ok(out.frames.iter().map(|f| f.to_raster()).collect())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn image_scores(cfg: &EvalConfig, a: &[Raster], b: &[Raster]) -> Result<(Option<f64>, Option<f64>), PipelineError> {
    let want = |m| cfg.metrics.contains(&m);
    let p = if want(Metric::Psnr) {
        mean(&a.iter().zip(b).map(|(x, y)| psnr(x, y, cfg.peak)).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    let s = if want(Metric::Ssim) {
        mean(&a.iter().zip(b).map(|(x, y)| ssim(x, y)).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    Ok((p, s))
}

/// Closed-loop mTSED: exact correspondences from room depth along the
/// trajectory. `None` without a room or when the camera only rotates.
fn trajectory_mtsed(cfg: &EvalConfig, scene: &Scene, run: &PairRun) -> Result<Option<f64>, PipelineError> {
    let Some(room) = &scene.room else { return Ok(None) };
    let k = &run.pair.intrinsics;
    let mut pairs = Vec::new();
    for w in run.poses.windows(2) {
        let rel = w[0].relative_pose(&w[1]);
        if rel.translation.norm() < 1e-9 {
            return Ok(None);
        }
        let depth = room.view_depth(&w[0], k)?;
        pairs.push((synthetic_correspondences(&depth.data, k, &w[0], k, &w[1], 4)?, rel));
    }
    Ok(Some(mtsed_sequence(&pairs, k, cfg.t_error_px, cfg.t_match)?.0))
}

fn sequence_features(frames: &[Raster]) -> Result<Vec<Vec<f64>>, PipelineError> {
    Ok(frames.iter().map(synthetic_frame_features).collect::<Result<_, _>>()?)
}

fn eval_runs(cfg: &EvalConfig, scene: &Scene, runs: &[PairRun]) -> Result<Vec<ReportRow>, PipelineError> {
    let mut rows = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let frames = run.frames.as_deref().expect("sampled before eval");
        let (psnr, ssim) = match &run.truth {
            Some(t) => image_scores(cfg, frames, t)?,
            None => (None, None),
        };
        let mtsed = if cfg.metrics.contains(&Metric::Mtsed) {
            trajectory_mtsed(cfg, scene, run)?
        } else {
            None
        };
        rows.push(ReportRow {
            name: pair_dir(i),
            frames: frames.len(),
            psnr,
            ssim,
            mtsed,
            fvd: None,
        });
    }
    let with_truth: Vec<&PairRun> = runs.iter().filter(|r| r.truth.is_some()).collect();
    if cfg.metrics.contains(&Metric::Fvd) && with_truth.len() >= 2 {
        let gen = with_truth
            .iter()
            .map(|r| sequence_features(r.frames.as_deref().unwrap()))
            .collect::<Result<Vec<_>, _>>()?;
        let real = with_truth
            .iter()
            .map(|r| sequence_features(r.truth.as_deref().unwrap()))
            .collect::<Result<Vec<_>, _>>()?;
        let p = feature_distribution(&video_feature_stack(&real)?)?;
        let q = feature_distribution(&video_feature_stack(&gen)?)?;
        let collect = |f: fn(&ReportRow) -> Option<f64>| mean(&rows.iter().filter_map(f).collect::<Vec<_>>());
        rows.push(ReportRow {
            name: "all".into(),
            frames: rows.iter().map(|r| r.frames).sum(),
            psnr: collect(|r| r.psnr),
            ssim: collect(|r| r.ssim),
            mtsed: collect(|r| r.mtsed),
            fvd: Some(frechet_distance(&p, &q)?),
        });
    }
    Ok(rows)
}

/// Image-by-image comparison of two PNG directories, matched by file name.
fn eval_dirs(cfg: &EvalConfig, reference: &Path, candidate: &Path, inputs: &mut Vec<FileRecord>) -> Result<Vec<ReportRow>, PipelineError> {
    let list = |d: &Path| -> Result<Vec<PathBuf>, PipelineError> {
        if !d.is_dir() {
            return Err(PipelineError::MissingInput(d.to_path_buf()));
        }
        Ok(io::list_pngs(d)?)
    };
    let (refs, cands) = (list(reference)?, list(candidate)?);
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    if names(&refs) != names(&cands) {
        return Err(PipelineError::Validation(format!(
            "{} and {} hold different file names",
            reference.display(),
            candidate.display()
        )));
    }
    for p in refs.iter().chain(&cands) {
        inputs.push(FileRecord {
            path: p.clone(),
            sha256: sha256_file(p)?,
        });
    }
    refs.par_iter()
        .zip(&cands)
        .map(|(a, b)| {
            let (ra, rb) = (io::read_png(a)?, io::read_png(b)?);
            let (psnr, ssim) = image_scores(cfg, std::slice::from_ref(&ra), std::slice::from_ref(&rb))?;
            Ok(ReportRow {
                name: a.file_name().unwrap().to_string_lossy().into_owned(),
                frames: 1,
                psnr,
                ssim,
                mtsed: None,
                fvd: None,
            })
        })
        .collect()
}

/// Tracks outputs of the running stage, relative to the output directory.
struct Outputs<'a> {
    root: &'a Path,
    files: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn path(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf, PipelineError> {
        let full = self.root.join(rel.as_ref());
        if let Some(d) = full.parent() {
            fs::create_dir_all(d)?;
        }
        self.files.push(rel.as_ref().to_path_buf());
        Ok(full)
    }

    fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), PipelineError> {
        let p = self.path(rel)?;
        fs::write(p, bytes)?;
        Ok(())
    }
}

/// Encoded PLKR bytes for `vol`, read from or stored in `cache` under the
/// hash of its sidecar JSON.
pub fn cached_plkr(cache: Option<&Path>, sidecar_json: &str, vol: &RaymapVolume) -> Result<Vec<u8>, PipelineError> {
    let key = sha256_bytes(sidecar_json.as_bytes());
    let path = cache.map(|c| c.join("raymaps").join(format!("{key}.plkr")));
    if let Some(p) = &path {
        if let Ok(bytes) = fs::read(p) {
            log::debug!("raymap cache hit {}", p.display());
            return Ok(bytes);
        }
    }
    let mut bytes = Vec::new();
    write_plkr(vol, &mut bytes)?;
    if let Some(p) = &path {
        let stored = p.parent().map_or(Ok(()), fs::create_dir_all).and_then(|_| fs::write(p, &bytes));
        if let Err(e) = stored {
            log::warn!("cannot write raymap cache {}: {e}", p.display());
        }
    }
    Ok(bytes)
}

fn run_stage(
    stage: Stage,
    cfg: &PipelineConfig,
    opts: &RunOptions,
    scene: &Scene,
    runs: &mut [PairRun],
    inputs: &mut Vec<FileRecord>,
    out: &mut Outputs<'_>,
) -> Result<(), PipelineError> {
    match stage {
        Stage::Project => {
            let p = &cfg.project;
            let split = split_panorama(&scene.pano, p.views, p.overlap, p.hfov_degrees.to_radians(), p.width_px, p.height_px)?;
            let mut records = Vec::new();
            for (i, (img, window)) in split.views.iter().enumerate() {
                io::write_png(&out.path(format!("project/view_{i:02}.png"))?, &img.raster, BitDepth::Eight)?;
                records.push(PoseRecord::new(&window.pose(Vector3::zeros()), window.intrinsics()));
            }
            io::write_json(&out.path("project/views.json")?, &records)?;
        }
        Stage::Keyframes => {
            let mut manifest = Vec::new();
            for (i, run) in runs.iter().enumerate() {
                let pr = &run.pair;
                let dir = format!("keyframes/{}", pair_dir(i));
                io::write_png(&out.path(format!("{dir}/source.png"))?, &pr.source.raster, BitDepth::Eight)?;
                io::write_png(&out.path(format!("{dir}/target.png"))?, &pr.target.raster, BitDepth::Eight)?;
                io::write_mask_png(
                    &out.path(format!("{dir}/inpaint_mask.png"))?,
                    &pr.target_inpaint_mask,
                    pr.intrinsics.width,
                    pr.intrinsics.height,
                )?;
                manifest.push(serde_json::json!({
                    "pair": pair_dir(i),
                    "relation": match pr.relation {
                        PairRelation::Neighboring => "neighbor",
                        PairRelation::WalkIn => "walkin",
                    },
                    "source": PoseRecord::new(&pr.source_pose, pr.intrinsics),
                    "target": PoseRecord::new(&pr.target_pose, pr.intrinsics),
                    "inpaint_pixels": pr.inpaint_area(),
                }));
            }
            io::write_json(&out.path("keyframes/pairs.json")?, &manifest)?;
        }
        Stage::Trajectory => {
            for (i, run) in runs.iter().enumerate() {
                let k = run.pair.intrinsics;
                let poses: Vec<_> = run.poses.iter().map(|p| (*p, k)).collect();
                io::write_poses(&out.path(format!("trajectory/{}.json", pair_dir(i)))?, &poses)?;
            }
        }
        Stage::Raymaps => {
            for (i, run) in runs.iter().enumerate() {
                let (vol, sidecar) = raymap_volume(cfg, run)?;
                let mut json = serde_json::to_string_pretty(&sidecar).map_err(|e| PipelineError::Runtime(e.to_string()))?;
                json.push('\n');
                let bytes = cached_plkr(opts.cache_dir.as_deref(), &json, &vol)?;
                out.write(format!("raymaps/{}.plkr", pair_dir(i)), &bytes)?;
                out.write(format!("raymaps/{}.json", pair_dir(i)), json.as_bytes())?;
            }
        }
        Stage::Sample => {
            for (i, run) in runs.iter().enumerate() {
                for (f, frame) in run.frames.as_deref().expect("sampled").iter().enumerate() {
                    let rel = format!("sample/{}/frame_{f:03}.png", pair_dir(i));
                    io::write_png(&out.path(rel)?, frame, BitDepth::Eight)?;
                }
            }
        }
        Stage::Eval => {
            let e = &cfg.eval;
            let rows = match (&e.reference_dir, &e.candidate_dir) {
                (Some(r), Some(c)) => eval_dirs(e, r, c, inputs)?,
                _ => eval_runs(e, scene, runs)?,
            };
            for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg] {
                out.write(format!("eval/report.{}", f.extension()), &render_report(&rows, f)?)?;
            }
        }
    }
    Ok(())
}

fn needs_scene(cfg: &PipelineConfig) -> bool {
    let dirs_only = cfg.eval.reference_dir.is_some() && cfg.stages == [Stage::Eval];
    !dirs_only
}

/// Runs the selected stages and writes `manifest.json` after each one.
///
/// A failing stage leaves a manifest with the completed stages and the
/// error message, and the error is returned.
pub fn run_pipeline(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut manifest = RunManifest::new(&cfg.to_toml(), cfg.seed);
    let result = run_stages(cfg, opts, &mut manifest);
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
    }
    manifest.write(&cfg.output_dir)?;
    result.map(|_| manifest)
}

fn run_stages(cfg: &PipelineConfig, opts: &RunOptions, manifest: &mut RunManifest) -> Result<(), PipelineError> {
    let eval_dirs_only = !needs_scene(cfg);
    let (scene, mut runs) = if eval_dirs_only {
        (None, Vec::new())
    } else {
        let scene = load_scene(cfg, &mut manifest.inputs)?;
        let runs = build_pairs(cfg, &scene)?
            .into_iter()
            .map(|pair| {
                let poses = interpolate_poses(&pair.source_pose, &pair.target_pose, cfg.trajectory.frames);
                let truth = ground_truth(&scene, &pair, &poses)?;
                Ok(PairRun {
                    pair,
                    poses,
                    truth,
                    frames: None,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        (Some(scene), runs)
    };
    if cfg.sampler.denoiser == "oracle" && runs.iter().any(|r| r.truth.is_none()) && !eval_dirs_only {
        let sampling = cfg.stages.iter().any(|s| matches!(s, Stage::Sample | Stage::Eval));
        if sampling {
            return Err(PipelineError::Validation(
                "the oracle denoiser needs ground truth; walk-in on an input panorama has none".into(),
            ));
        }
    }
    manifest.write(&cfg.output_dir)?;
    for &stage in &cfg.stages {
        let start = Instant::now();
        let mut out = Outputs {
            root: &cfg.output_dir,
            files: Vec::new(),
        };
        let mut sampled = Ok(());
        if matches!(stage, Stage::Sample | Stage::Eval) && !eval_dirs_only {
            for (i, run) in runs.iter_mut().enumerate() {
                if run.frames.is_none() {
                    match sample_pair(cfg, run, i) {
                        Ok(f) => run.frames = Some(f),
                        Err(e) => {
                            sampled = Err(e);
                            break;
                        }
                    }
                }
            }
        }
        let mut inputs = std::mem::take(&mut manifest.inputs);
        let res = sampled.and_then(|_| match &scene {
            Some(s) => run_stage(stage, cfg, opts, s, &mut runs, &mut inputs, &mut out),
            None => {
                let e = &cfg.eval;
                let rows = eval_dirs(e, e.reference_dir.as_ref().unwrap(), e.candidate_dir.as_ref().unwrap(), &mut inputs)?;
                for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg] {
                    out.write(format!("eval/report.{}", f.extension()), &render_report(&rows, f)?)?;
                }
                Ok(())
            }
        });
        manifest.inputs = inputs;
        res.map_err(|e| PipelineError::Stage {
            stage,
            source: Box::new(e),
        })?;
        let outputs = out
            .files
            .iter()
            .map(|rel| {
                Ok(FileRecord {
                    path: rel.clone(),
                    sha256: sha256_file(&cfg.output_dir.join(rel))?,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        manifest.stages.push(StageRecord {
            stage,
            outputs,
            wall_clock_ms: if cfg.record_wall_clock {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        manifest.write(&cfg.output_dir)?;
        log::info!("stage {} done", stage.name());
    }
    Ok(())
}

/// τ sweep on the configured scene's first keyframe pair with the oracle
/// denoiser.
pub fn run_sweep(cfg: &PipelineConfig, tau_t: &[f64], tau_q: &[f64]) -> Result<TauSweep, PipelineError> {
    cfg.validate()?;
    let scene = load_scene(cfg, &mut Vec::new())?;
    let pair = build_pairs(cfg, &scene)?
        .into_iter()
        .next()
        .ok_or_else(|| PipelineError::Validation("no keyframe pair to sweep".into()))?;
    let poses = interpolate_poses(&pair.source_pose, &pair.target_pose, cfg.trajectory.frames);
    let truth = ground_truth(&scene, &pair, &poses)?
        .ok_or_else(|| PipelineError::Validation("the sweep needs ground-truth frames".into()))?;
    let gt: Vec<Latent> = truth.iter().map(Latent::from_raster).collect();
    let oracle = OracleDenoiser::new(gt.clone());
    let problem = SweepProblem {
        denoiser: &oracle,
        ground_truth: gt,
        anchors: anchors_from_pair(&pair, poses.len())?,
        frame_poses: poses,
        schedule: schedule(&cfg.sampler)?,
        mode: cfg.sampler.mode,
        seed: pair_seed(cfg.seed, 0),
    };
    tau_sweep(&problem, tau_t, tau_q)
}
