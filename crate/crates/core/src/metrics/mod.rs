//! Image and video consistency metrics.

mod epipolar;
mod features;
mod frechet;
mod image;

use thiserror::Error;

pub use epipolar::{
    fundamental_matrix, mtsed_pair, mtsed_sequence, project_points, symmetric_epipolar_distance,
    synthetic_correspondences, Correspondences, Match, MtsedPair, DEFAULT_T_ERROR, DEFAULT_T_MATCH,
};
pub use features::{sequence_feature, synthetic_frame_features, video_feature_stack, SYNTHETIC_FEATURE_DIM};
pub use frechet::{feature_distribution, frechet_distance, FeatureDistribution};
pub use image::{psnr, ssim, SSIM_WINDOW};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: usize, height: usize, window: usize },
    #[error("relative pose has no translation, the essential matrix is undefined")]
    DegenerateEssential,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("matrix square root failed: {0}")]
    SquareRoot(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
