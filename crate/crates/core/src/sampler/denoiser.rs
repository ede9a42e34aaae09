use sha2::{Digest, Sha256};

use super::latent::{cycle_shift, Latent};
use super::schedule::NoiseSchedule;
use super::SamplerError;
use crate::raymap::RaymapVolume;
use crate::types::Raster;

/// Side information handed to the denoiser with every call.
#[derive(Clone, Copy, Debug, Default)]
pub struct Conditioning<'a> {
    /// Opaque keyframe features of the source and target keyframes.
    pub features: Option<(&'a [f64], &'a [f64])>,
    pub raymaps: Option<&'a RaymapVolume>,
    /// Quarter turns the panorama latent has been shifted by so far.
    pub quarter_turns: usize,
    /// Anchor the prediction is made for, in per-anchor blend mode.
    pub anchor: Option<usize>,
}

/// Predicts the clean volume `v̂` from the noisy volume `z_t`.
///
/// Implementations must return one latent per input frame with matching
/// shape, and must be deterministic for fixed inputs.
pub trait Denoiser: Sync {
    fn predict(
        &self,
        z: &[Latent],
        t: usize,
        schedule: &NoiseSchedule,
        cond: &Conditioning<'_>,
    ) -> Result<Vec<Latent>, SamplerError>;
}

/// `ε = (z − √ᾱ_t v)/√(1 − ᾱ_t)`.
pub fn clean_to_epsilon(z: &Latent, clean: &Latent, alpha_bar: f64) -> Latent {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    Latent {
        data: z.data.iter().zip(&clean.data).map(|(z, v)| (z - a * v) / b).collect(),
        ..*z
    }
}

/// `v = (z − √(1 − ᾱ_t) ε)/√ᾱ_t`.
pub fn epsilon_to_clean(z: &Latent, eps: &Latent, alpha_bar: f64) -> Latent {
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    Latent {
        data: z.data.iter().zip(&eps.data).map(|(z, e)| (z - b * e) / a).collect(),
        ..*z
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parameterization {
    /// Returns the target directly.
    #[default]
    Clean,
    /// Computes the exact noise first and converts it back to `v̂`.
    Epsilon,
}

/// Test denoiser that knows the clean answer.
///
/// In panorama mode the target is shifted along with the latent, which
/// makes the oracle shift-equivariant.
#[derive(Clone, Debug)]
pub struct OracleDenoiser {
    pub targets: Vec<Latent>,
    pub parameterization: Parameterization,
}

impl OracleDenoiser {
    pub fn new(targets: Vec<Latent>) -> Self {
        Self {
            targets,
            parameterization: Parameterization::Clean,
        }
    }

    pub fn epsilon(targets: Vec<Latent>) -> Self {
        Self {
            targets,
            parameterization: Parameterization::Epsilon,
        }
    }
}

impl Denoiser for OracleDenoiser {
    fn predict(
        &self,
        z: &[Latent],
        t: usize,
        schedule: &NoiseSchedule,
        cond: &Conditioning<'_>,
    ) -> Result<Vec<Latent>, SamplerError> {
        if z.len() != self.targets.len() {
            return Err(SamplerError::Shape(format!(
                "oracle holds {} frames, got {}",
                self.targets.len(),
                z.len()
            )));
        }
        let ab = schedule.alpha_bar(t)?;
        z.iter()
            .zip(&self.targets)
            .map(|(zf, target)| {
                zf.check_shape(target)?;
                let target = if cond.quarter_turns % 4 != 0 {
                    cycle_shift(target, cond.quarter_turns as i64)?
                } else {
                    target.clone()
                };
                Ok(match self.parameterization {
                    Parameterization::Clean => target,
                    Parameterization::Epsilon => epsilon_to_clean(zf, &clean_to_epsilon(zf, &target, ab), ab),
                })
            })
            .collect()
    }
}

/// Deterministic placeholder: `v̂ = √ᾱ_t · z`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StubDenoiser;

impl Denoiser for StubDenoiser {
    fn predict(
        &self,
        z: &[Latent],
        t: usize,
        schedule: &NoiseSchedule,
        _cond: &Conditioning<'_>,
    ) -> Result<Vec<Latent>, SamplerError> {
        let s = schedule.alpha_bar(t)?.sqrt();
        Ok(z.iter()
            .map(|f| Latent {
                data: f.data.iter().map(|x| s * x).collect(),
                ..*f
            })
            .collect())
    }
}

/// Hash-derived stand-in for keyframe embeddings: `dim` values in
/// `[-1, 1]` that change with any pixel of the image.
pub fn stub_features(image: &Raster, dim: usize) -> Vec<f64> {
    let mut seed = Sha256::new();
    seed.update((image.width as u64).to_le_bytes());
    seed.update((image.height as u64).to_le_bytes());
    seed.update((image.channels as u64).to_le_bytes());
    for x in &image.data {
        seed.update(x.to_le_bytes());
    }
    let seed = seed.finalize();
    let mut out = Vec::with_capacity(dim);
    let mut block = 0u64;
    while out.len() < dim {
        let h = Sha256::new().chain_update(seed).chain_update(block.to_le_bytes()).finalize();
        for c in h.chunks_exact(4) {
            if out.len() == dim {
                break;
            }
            let v = u32::from_le_bytes(c.try_into().unwrap());
            out.push(v as f64 / u32::MAX as f64 * 2.0 - 1.0);
        }
        block += 1;
    }
    out
}
