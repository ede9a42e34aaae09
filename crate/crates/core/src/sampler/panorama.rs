use super::denoiser::{clean_to_epsilon, Conditioning, Denoiser};
use super::latent::{cycle_shift, cycle_shift_mask, forward_noise, outpaint_fuse, Latent};
use super::rng::{gaussian_latent, step_rng, Stream};
use super::schedule::{ddpm_step, NoiseSchedule};
use super::SamplerError;

#[derive(Clone, Debug, PartialEq)]
pub struct PanoramaSample {
    /// Clean latent in the input orientation.
    pub latent: Latent,
    /// Quarter turns applied during sampling.
    pub quarter_turns: usize,
}

/// Outpaints a latent panorama around the pixels flagged in `known_mask`.
///
/// Every step fuses the forward-noised known latent into the reverse
/// update. With `cycle_interval = Some(k)` the working latent (and with it
/// the mask) is rotated by a quarter turn after every `k` steps, so that the
/// wrap seam is denoised away from the border; the result is rotated back.
pub fn panorama_outpaint_sample(
    denoiser: &dyn Denoiser,
    known: &Latent,
    known_mask: &[bool],
    schedule: &NoiseSchedule,
    cycle_interval: Option<usize>,
    seed: u64,
) -> Result<PanoramaSample, SamplerError> {
    if known_mask.len() != known.pixels() {
        return Err(SamplerError::Shape(format!(
            "mask of {} pixels for a {}x{} panorama",
            known_mask.len(),
            known.width,
            known.height
        )));
    }
    if cycle_interval.is_some() && known.width % 4 != 0 {
        return Err(SamplerError::IndivisibleWidth(known.width));
    }
    let steps = schedule.steps();
    let (w, h, c) = (known.width, known.height, known.channels);
    let mut turns = 0usize;
    let mut known_w = known.clone();
    let mut mask_w = known_mask.to_vec();
    let mut z = gaussian_latent(w, h, c, &mut step_rng(seed, Stream::Init(0), steps + 1));
    for t in (1..=steps).rev() {
        let cond = Conditioning {
            quarter_turns: turns,
            ..Default::default()
        };
        let mut pred = denoiser.predict(std::slice::from_ref(&z), t, schedule, &cond)?;
        if pred.len() != 1 {
            return Err(SamplerError::Denoiser(format!("expected 1 frame, got {}", pred.len())));
        }
        let v = pred.pop().unwrap();
        z.check_shape(&v)?;
        let eps = clean_to_epsilon(&z, &v, schedule.alpha_bar(t)?);
        let mut rng = step_rng(seed, Stream::Reverse(0), t);
        let unknown = ddpm_step(&z, &eps, schedule, t, Some(&mut rng))?;
        let noise = gaussian_latent(w, h, c, &mut step_rng(seed, Stream::Known(0), t));
        let known_path = forward_noise(&known_w, schedule, t - 1, &noise)?;
        z = outpaint_fuse(&known_path, &unknown, &mask_w)?;
        if let Some(k) = cycle_interval {
            if k > 0 && t > 1 && (steps - t + 1) % k == 0 {
                z = cycle_shift(&z, 1)?;
                known_w = cycle_shift(&known_w, 1)?;
                mask_w = cycle_shift_mask(&mask_w, w, 1);
                turns += 1;
            }
        }
    }
    let latent = if turns % 4 == 0 { z } else { cycle_shift(&z, -(turns as i64))? };
    Ok(PanoramaSample {
        latent,
        quarter_turns: turns,
    })
}

/// Mean absolute jump across the wrap seam (last column vs first column).
pub fn seam_energy(z: &Latent) -> f64 {
    let (w, c) = (z.width, z.channels);
    let mut total = 0.0;
    for v in 0..z.height {
        for ch in 0..c {
            total += (z.data[(v * w + w - 1) * c + ch] - z.data[v * w * c + ch]).abs();
        }
    }
    total / (z.height * c) as f64
}
