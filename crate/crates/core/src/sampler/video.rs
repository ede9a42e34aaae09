use rayon::prelude::*;

use super::denoiser::{Conditioning, Denoiser};
use super::latent::{forward_noise, outpaint_fuse, Latent};
use super::rng::{gaussian_latent, step_rng, Stream};
use super::schedule::{ddpm_step, NoiseSchedule};
use super::weights::{compute_spatial_weights, SpatialWeights, WeightMode};
use super::SamplerError;
use crate::keyframes::KeyframePair;
use crate::raymap::RaymapVolume;
use crate::types::CameraPose;

/// A keyframe pinned inside the video volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub frame: usize,
    pub clean: Latent,
    /// `true` where the anchor content is known and kept out of denoising.
    pub known: Vec<bool>,
}

/// Source anchor at frame 0 (fully known) and target anchor at the last
/// frame (known outside the pair's inpaint mask).
pub fn anchors_from_pair(pair: &KeyframePair, n_frames: usize) -> Result<Vec<Anchor>, SamplerError> {
    if n_frames < 2 {
        return Err(SamplerError::Shape("a pair needs at least two frames".into()));
    }
    let src = Latent::from_raster(&pair.source.raster);
    let tgt = Latent::from_raster(&pair.target.raster);
    Ok(vec![
        Anchor {
            frame: 0,
            known: vec![true; src.pixels()],
            clean: src,
        },
        Anchor {
            frame: n_frames - 1,
            known: pair.target_inpaint_mask.iter().map(|&m| !m).collect(),
            clean: tgt,
        },
    ])
}

pub struct VideoRequest<'a> {
    /// Poses of every frame, anchors included.
    pub frame_poses: &'a [CameraPose],
    /// The first anchor is the source keyframe.
    pub anchors: &'a [Anchor],
    pub raymaps: Option<&'a RaymapVolume>,
    pub features: Option<(&'a [f64], &'a [f64])>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialConfig {
    pub tau_t: f64,
    pub tau_q: f64,
    pub mode: WeightMode,
    pub seed: u64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            tau_t: 4.7,
            tau_q: 1.68,
            mode: WeightMode::Literal,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VideoSample {
    pub frames: Vec<Latent>,
    pub weights: SpatialWeights,
}

fn validate(req: &VideoRequest<'_>) -> Result<(usize, usize, usize), SamplerError> {
    let n = req.frame_poses.len();
    let first = req
        .anchors
        .first()
        .ok_or_else(|| SamplerError::Missing("anchor latents".into()))?;
    let shape = (first.clean.width, first.clean.height, first.clean.channels);
    for a in req.anchors {
        if a.frame >= n {
            return Err(SamplerError::Shape(format!("anchor frame {} of {n}", a.frame)));
        }
        a.clean.check_shape(&first.clean)?;
        if a.known.len() != a.clean.pixels() {
            return Err(SamplerError::Shape(format!("anchor {} mask size {}", a.frame, a.known.len())));
        }
    }
    if let Some(r) = req.raymaps {
        if r.len() != n {
            return Err(SamplerError::Shape(format!("{} raymaps for {n} frames", r.len())));
        }
    }
    Ok(shape)
}

/// Spatially weighted reverse diffusion between anchor keyframes.
///
/// Per step the denoiser predicts `v̂`, the noise estimate is
/// `ε = (z_t − γ √ᾱ_t v̂)/√(1 − ᾱ_t)` and the standard reverse update
/// follows. Known anchor pixels are replaced by their forward-noised clean
/// latent after every step, so they come out unchanged.
pub fn spatial_diffusion_sample(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    req: &VideoRequest<'_>,
    cfg: &SpatialConfig,
) -> Result<VideoSample, SamplerError> {
    let (w, h, c) = validate(req)?;
    let n = req.frame_poses.len();
    let anchor_poses: Vec<CameraPose> = req.anchors.iter().map(|a| req.frame_poses[a.frame]).collect();
    let weights = compute_spatial_weights(req.frame_poses, &anchor_poses, cfg.tau_t, cfg.tau_q)?;
    let steps = schedule.steps();
    let mut anchor_of = vec![None; n];
    for a in req.anchors {
        anchor_of[a.frame] = Some(a);
    }

    let mut z: Vec<Latent> = (0..n)
        .map(|f| gaussian_latent(w, h, c, &mut step_rng(cfg.seed, Stream::Init(f), steps + 1)))
        .collect();
    for t in (1..=steps).rev() {
        let base = Conditioning {
            features: req.features,
            raymaps: req.raymaps,
            ..Default::default()
        };
        // per-frame clean prediction and the scalar it is weighted by
        let (preds, scale): (Vec<Latent>, Vec<f64>) = match cfg.mode {
            WeightMode::Literal => {
                let p = checked_predict(denoiser, &z, t, schedule, &base)?;
                (p, weights.gamma.iter().map(|row| row[0]).collect())
            }
            WeightMode::Blend => {
                let per_anchor = (0..req.anchors.len())
                    .map(|k| {
                        let cond = Conditioning {
                            anchor: Some(k),
                            ..base
                        };
                        checked_predict(denoiser, &z, t, schedule, &cond)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let blended = (0..n)
                    .map(|f| {
                        let mut acc = Latent::zeros(w, h, c);
                        for (k, p) in per_anchor.iter().enumerate() {
                            let g = weights.gamma[f][k];
                            acc.data.iter_mut().zip(&p[f].data).for_each(|(a, x)| *a += g * x);
                        }
                        acc
                    })
                    .collect();
                (blended, vec![1.0; n])
            }
        };
        let ab = schedule.alpha_bar(t)?;
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        z = z
            .par_iter()
            .enumerate()
            .map(|(f, zf)| {
                let g = scale[f];
                let eps = Latent {
                    data: zf
                        .data
                        .iter()
                        .zip(&preds[f].data)
                        .map(|(z, v)| (z - g * sa * v) / sb)
                        .collect(),
                    ..*zf
                };
                let mut rng = step_rng(cfg.seed, Stream::Reverse(f), t);
                let next = ddpm_step(zf, &eps, schedule, t, Some(&mut rng))?;
                match anchor_of[f] {
                    Some(a) => {
                        let noise = gaussian_latent(w, h, c, &mut step_rng(cfg.seed, Stream::Known(f), t));
                        let known = forward_noise(&a.clean, schedule, t - 1, &noise)?;
                        outpaint_fuse(&known, &next, &a.known)
                    }
                    None => Ok(next),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
    }
    Ok(VideoSample { frames: z, weights })
}

fn checked_predict(
    denoiser: &dyn Denoiser,
    z: &[Latent],
    t: usize,
    schedule: &NoiseSchedule,
    cond: &Conditioning<'_>,
) -> Result<Vec<Latent>, SamplerError> {
    let p = denoiser.predict(z, t, schedule, cond)?;
    if p.len() != z.len() {
        return Err(SamplerError::Denoiser(format!("expected {} frames, got {}", z.len(), p.len())));
    }
    for (a, b) in p.iter().zip(z) {
        a.check_shape(b)?;
    }
    Ok(p)
}
