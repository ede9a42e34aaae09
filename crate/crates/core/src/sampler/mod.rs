//! Diffusion samplers over a pluggable denoiser.
//!
//! The panorama sampler outpaints a latent panorama around a known
//! footprint with periodic quarter-turn shifts; the video sampler runs the
//! spatially weighted reverse process between two anchor keyframes.

mod denoiser;
mod external;
mod latent;
mod panorama;
mod rng;
mod schedule;
mod video;
mod weights;

use thiserror::Error;

pub use denoiser::{
    clean_to_epsilon, epsilon_to_clean, stub_features, Conditioning, Denoiser, OracleDenoiser, Parameterization,
    StubDenoiser,
};
pub use external::{serve_connection, ExternalDenoiser, Request, Response, MAX_FRAME_BYTES};
pub use latent::{cycle_shift, forward_noise, outpaint_fuse, Latent};
pub use panorama::{panorama_outpaint_sample, seam_energy, PanoramaSample};
pub use rng::{gaussian_latent, step_rng, Stream};
pub use schedule::{ddpm_step, make_schedule, NoiseSchedule, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN};
pub use video::{anchors_from_pair, spatial_diffusion_sample, Anchor, SpatialConfig, VideoRequest, VideoSample};
pub use weights::{compute_spatial_weights, SpatialWeights, WeightMode};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("step {t} outside [1, {total}]")]
    StepOutOfRange { t: usize, total: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("latent width {0} is not divisible by 4")]
    IndivisibleWidth(usize),
    #[error("invalid temperatures: {0}")]
    Temperature(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("step {0} needs noise but no generator was supplied")]
    NoRng(usize),
    #[error("denoiser failed: {0}")]
    Denoiser(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
