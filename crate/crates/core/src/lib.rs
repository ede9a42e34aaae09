//! Geometry, sampling and metrics for two-stage panorama-then-video view
//! synthesis.
//!
//! The crate covers the non-neural machinery: equirectangular projection,
//! keyframe construction and depth warping, Plücker raymaps, camera
//! trajectories, diffusion samplers over a pluggable denoiser, and
//! consistency metrics. Neural networks only enter through
//! [`sampler::Denoiser`].

pub mod io;
pub mod keyframes;
pub mod metrics;
pub mod pipeline;
pub mod projection;
pub mod quaternion;
pub mod raymap;
pub mod scene;
pub mod sampler;
pub mod trajectory;
pub mod types;

pub use quaternion::Quaternion;
pub use types::{CameraIntrinsics, CameraPose, DepthMap, PanoramaImage, PerspectiveImage, Raster};
