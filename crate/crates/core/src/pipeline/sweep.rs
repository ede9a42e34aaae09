use rayon::prelude::*;
use serde::Serialize;

use super::PipelineError;
use crate::metrics::ssim;
use crate::sampler::{spatial_diffusion_sample, Anchor, Denoiser, Latent, NoiseSchedule, SpatialConfig, VideoRequest, WeightMode};
use crate::types::CameraPose;

/// Scores over a `(τ_T, τ_q)` grid; `scores[i][j]` belongs to
/// `(tau_t[i], tau_q[j])`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauSweep {
    pub tau_t: Vec<f64>,
    pub tau_q: Vec<f64>,
    pub scores: Vec<Vec<f64>>,
    /// `(τ_T, τ_q, score)` of the highest-scoring cell.
    pub best: (f64, f64, f64),
}

impl TauSweep {
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.tau_t
            .iter()
            .zip(&self.scores)
            .flat_map(move |(&t, row)| self.tau_q.iter().zip(row).map(move |(&q, &s)| (t, q, s)))
    }
}

/// A sampling problem with known answer.
pub struct SweepProblem<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub ground_truth: Vec<Latent>,
    pub frame_poses: Vec<CameraPose>,
    pub anchors: Vec<Anchor>,
    pub schedule: NoiseSchedule,
    pub mode: WeightMode,
    pub seed: u64,
}

/// Mean SSIM between sampled and ground-truth frames for every grid
/// point. Frames narrower than the SSIM window fall back to `1 − MAE`.
pub fn tau_sweep(problem: &SweepProblem<'_>, tau_t: &[f64], tau_q: &[f64]) -> Result<TauSweep, PipelineError> {
    if tau_t.is_empty() || tau_q.is_empty() {
        return Err(PipelineError::Validation("empty temperature grid".into()));
    }
    if let Some(bad) = tau_t.iter().chain(tau_q).find(|&&x| !(x > 0.0)) {
        return Err(PipelineError::Validation(format!("temperature {bad} must be positive")));
    }
    let req = VideoRequest {
        frame_poses: &problem.frame_poses,
        anchors: &problem.anchors,
        raymaps: None,
        features: None,
    };
    let cells: Vec<(usize, usize)> = (0..tau_t.len()).flat_map(|i| (0..tau_q.len()).map(move |j| (i, j))).collect();
    let flat = cells
        .par_iter()
        .map(|&(i, j)| {
            let cfg = SpatialConfig {
                tau_t: tau_t[i],
                tau_q: tau_q[j],
                mode: problem.mode,
                seed: problem.seed,
            };
            let out = spatial_diffusion_sample(problem.denoiser, &problem.schedule, &req, &cfg)?;
            score(&out.frames, &problem.ground_truth)
        })
        .collect::<Result<Vec<f64>, PipelineError>>()?;
    let scores: Vec<Vec<f64>> = flat.chunks(tau_q.len()).map(|c| c.to_vec()).collect();
    let (bi, bj) = cells
        .iter()
        .copied()
        .fold(None::<(usize, usize)>, |best, (i, j)| match best {
            Some((a, b)) if scores[a][b] >= scores[i][j] => Some((a, b)),
            _ => Some((i, j)),
        })
        .unwrap();
    Ok(TauSweep {
        tau_t: tau_t.to_vec(),
        tau_q: tau_q.to_vec(),
        best: (tau_t[bi], tau_q[bj], scores[bi][bj]),
        scores,
    })
}

fn score(frames: &[Latent], truth: &[Latent]) -> Result<f64, PipelineError> {
    let mut total = 0.0;
    for (a, b) in frames.iter().zip(truth) {
        let (ra, rb) = (a.to_raster(), b.to_raster());
        total += match ssim(&ra, &rb) {
            Ok(s) => s,
            Err(crate::metrics::MetricsError::TooSmall { .. }) => {
                1.0 - a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64
            }
            Err(e) => return Err(e.into()),
        };
    }
    Ok(total / frames.len() as f64)
}

/// Parses `start:stop:step` (inclusive, within half a step) into a grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, PipelineError> {
    let bad = || PipelineError::Validation(format!("grid {spec:?} is not start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 0.5).floor() as usize;
    // round to the step's decimal precision so 0.1 steps print cleanly
    Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect())
}
