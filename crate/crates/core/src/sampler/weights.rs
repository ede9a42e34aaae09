use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::types::CameraPose;

/// How fused anchor weights enter the reverse update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// One denoiser call per step; each frame's clean prediction is scaled
    /// by its weight toward the source anchor.
    #[default]
    Literal,
    /// One denoiser call per anchor; predictions are blended per frame.
    Blend,
}

/// Per-frame, per-anchor proximity weights. Rows are frames.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpatialWeights {
    pub omega: Vec<Vec<f64>>,
    pub beta_orient: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub tau_t: f64,
    pub tau_q: f64,
}

/// `ω = exp(−|ΔT|/τ_T)`, `β = exp(−θ/τ_q)` with `θ` the rotation angle
/// between the two orientations, and `γ = ωβ / Σ ωβ` over anchors.
///
/// Normalization runs in log space, so rows still sum to one when every
/// product underflows. Infinite temperatures give uniform weights.
pub fn compute_spatial_weights(
    frame_poses: &[CameraPose],
    anchor_poses: &[CameraPose],
    tau_t: f64,
    tau_q: f64,
) -> Result<SpatialWeights, SamplerError> {
    if !(tau_t > 0.0 && tau_q > 0.0) || tau_t.is_nan() || tau_q.is_nan() {
        return Err(SamplerError::Temperature(format!(
            "temperatures must be positive, got tau_t={tau_t} tau_q={tau_q}"
        )));
    }
    if anchor_poses.is_empty() {
        return Err(SamplerError::Missing("at least one anchor pose".into()));
    }
    let mut out = SpatialWeights {
        omega: Vec::with_capacity(frame_poses.len()),
        beta_orient: Vec::with_capacity(frame_poses.len()),
        gamma: Vec::with_capacity(frame_poses.len()),
        tau_t,
        tau_q,
    };
    for f in frame_poses {
        let logs: Vec<(f64, f64)> = anchor_poses
            .iter()
            .map(|a| {
                let dist = (f.translation - a.translation).norm();
                // 2·acos(|⟨q_f, q_a⟩|), computed without the acos precision loss
                let angle = f.rotation().angle_to(a.rotation());
                (-dist / tau_t, -angle / tau_q)
            })
            .collect();
        let max = logs.iter().map(|(p, o)| p + o).fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = logs.iter().map(|(p, o)| (p + o - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        out.omega.push(logs.iter().map(|(p, _)| p.exp()).collect());
        out.beta_orient.push(logs.iter().map(|(_, o)| o.exp()).collect());
        out.gamma.push(unnorm.iter().map(|u| u / total).collect());
    }
    Ok(out)
}
