use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::keyframes::AxisDepth;
use crate::sampler::WeightMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Project,
    Keyframes,
    Trajectory,
    Raymaps,
    Sample,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Project,
        Stage::Keyframes,
        Stage::Trajectory,
        Stage::Raymaps,
        Stage::Sample,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Project => "project",
            Stage::Keyframes => "keyframes",
            Stage::Trajectory => "trajectory",
            Stage::Raymaps => "raymaps",
            Stage::Sample => "sample",
            Stage::Eval => "eval",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyframeMode {
    #[default]
    Neighbor,
    Walkin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Psnr,
    Ssim,
    Mtsed,
    Fvd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Equirectangular PNG. Ignored when `synthetic_room` is set.
    pub panorama: Option<PathBuf>,
    /// Equirectangular depth (PFM, or 16-bit PNG scaled by `max_depth_meters`).
    pub depth: Option<PathBuf>,
    pub max_depth_meters: Option<f64>,
    /// Render panorama and depth from the built-in box room.
    pub synthetic_room: bool,
    pub panorama_width_px: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            panorama: None,
            depth: None,
            max_depth_meters: None,
            synthetic_room: true,
            panorama_width_px: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub views: usize,
    pub overlap: f64,
    pub hfov_degrees: f64,
    pub width_px: usize,
    pub height_px: usize,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            views: 4,
            overlap: 0.25,
            hfov_degrees: 90.0,
            width_px: 32,
            height_px: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyframesConfig {
    pub mode: KeyframeMode,
    pub walk_ratio: f64,
    /// Walk-in window direction.
    pub yaw_degrees: f64,
    pub pitch_degrees: f64,
    pub depth_mode: AxisDepth,
    /// Keep only the first pairs; all when unset.
    pub max_pairs: Option<usize>,
}

impl Default for KeyframesConfig {
    fn default() -> Self {
        Self {
            mode: KeyframeMode::Neighbor,
            walk_ratio: 0.8,
            yaw_degrees: 0.0,
            pitch_degrees: 0.0,
            depth_mode: AxisDepth::CentralPixel,
            max_pairs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    /// Frames per pair, both keyframes included.
    pub frames: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { frames: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaymapConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub normalized: bool,
}

impl Default for RaymapConfig {
    fn default() -> Self {
        Self {
            width_px: 32,
            height_px: 32,
            normalized: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub zero_variance: bool,
    pub tau_t_meters: f64,
    pub tau_q_radians: f64,
    pub mode: WeightMode,
    /// `oracle`, `stub`, or `external:<host:port | socket path>`.
    pub denoiser: String,
    pub feature_dim: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            beta_min: crate::sampler::DEFAULT_BETA_MIN,
            beta_max: crate::sampler::DEFAULT_BETA_MAX,
            zero_variance: false,
            tau_t_meters: 4.7,
            tau_q_radians: 1.68,
            mode: WeightMode::Literal,
            denoiser: "oracle".into(),
            feature_dim: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    /// With `candidate_dir`, evaluates two PNG directories instead of the
    /// sampled frames.
    pub reference_dir: Option<PathBuf>,
    pub candidate_dir: Option<PathBuf>,
    pub peak: f64,
    pub t_error_px: f64,
    pub t_match: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Psnr, Metric::Ssim, Metric::Mtsed, Metric::Fvd],
            reference_dir: None,
            candidate_dir: None,
            peak: 1.0,
            t_error_px: crate::metrics::DEFAULT_T_ERROR,
            t_match: crate::metrics::DEFAULT_T_MATCH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    /// Off makes the manifest itself byte-reproducible.
    #[serde(default = "yes")]
    pub record_wall_clock: bool,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub project: ProjectConfig,
    #[serde(default)]
    pub keyframes: KeyframesConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub raymap: RaymapConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn yes() -> bool {
    true
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), PipelineError> {
    if ok {
        Ok(())
    } else {
        Err(PipelineError::Validation(msg()))
    }
}

impl PipelineConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            output_dir: output_dir.into(),
            stages: all_stages(),
            record_wall_clock: true,
            input: InputConfig::default(),
            project: ProjectConfig::default(),
            keyframes: KeyframesConfig::default(),
            trajectory: TrajectoryConfig::default(),
            raymap: RaymapConfig::default(),
            sampler: SamplerConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.to_path_buf()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let p = &self.project;
        check(self.stages.windows(2).all(|w| w[0] < w[1]), || {
            "stages must be listed once each in pipeline order".into()
        })?;
        check((3..=12).contains(&p.views), || format!("project.views {} outside [3, 12]", p.views))?;
        check((0.0..=2.0 / 3.0).contains(&p.overlap), || format!("project.overlap {} outside [0, 2/3]", p.overlap))?;
        check(p.hfov_degrees > 0.0 && p.hfov_degrees < 180.0, || {
            format!("project.hfov_degrees {} outside (0, 180)", p.hfov_degrees)
        })?;
        check(p.width_px >= 1 && p.height_px >= 1, || "project image size must be positive".into())?;
        let i = &self.input;
        check(i.synthetic_room || i.panorama.is_some(), || {
            "input.panorama is required unless input.synthetic_room is set".into()
        })?;
        check(i.panorama_width_px >= 8 && i.panorama_width_px % 2 == 0, || {
            format!("input.panorama_width_px {} must be even and at least 8", i.panorama_width_px)
        })?;
        if let Some(m) = i.max_depth_meters {
            check(m > 0.0, || format!("input.max_depth_meters {m} must be positive"))?;
        }
        let k = &self.keyframes;
        check((0.0..1.0).contains(&k.walk_ratio), || format!("keyframes.walk_ratio {} outside [0, 1)", k.walk_ratio))?;
        check(k.pitch_degrees.abs() < 90.0, || format!("keyframes.pitch_degrees {} outside (-90, 90)", k.pitch_degrees))?;
        check(k.mode != KeyframeMode::Walkin || i.synthetic_room || i.depth.is_some(), || {
            "walk-in keyframes need input.depth or the synthetic room".into()
        })?;
        check(k.max_pairs != Some(0), || "keyframes.max_pairs must be positive".into())?;
        check(self.trajectory.frames >= 2, || "trajectory.frames must be at least 2".into())?;
        check(self.raymap.width_px >= 1 && self.raymap.height_px >= 1, || "raymap size must be positive".into())?;
        let s = &self.sampler;
        check(s.steps >= 1, || "sampler.steps must be positive".into())?;
        check(0.0 < s.beta_min && s.beta_min <= s.beta_max && s.beta_max < 1.0, || {
            format!("sampler betas {}..{} outside (0, 1)", s.beta_min, s.beta_max)
        })?;
        check(s.tau_t_meters > 0.0 && s.tau_q_radians > 0.0, || "sampler temperatures must be positive".into())?;
        check(
            s.denoiser == "oracle" || s.denoiser == "stub" || s.denoiser.strip_prefix("external:").is_some_and(|a| !a.is_empty()),
            || format!("sampler.denoiser {:?} is not oracle, stub or external:<addr>", s.denoiser),
        )?;
        check(s.feature_dim >= 1, || "sampler.feature_dim must be positive".into())?;
        let e = &self.eval;
        check(e.peak > 0.0 && e.t_error_px > 0.0, || "eval.peak and eval.t_error_px must be positive".into())?;
        check(e.reference_dir.is_some() == e.candidate_dir.is_some(), || {
            "eval.reference_dir and eval.candidate_dir go together".into()
        })?;
        Ok(())
    }
}
