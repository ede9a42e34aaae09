use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::latent::Latent;
use super::SamplerError;

pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.02;

/// Linear variance schedule. Steps are 1-based: `alpha(1)` is the first
/// (least noisy) step.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
    pub sigmas: Vec<f64>,
}

pub fn make_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule, SamplerError> {
    if steps == 0 {
        return Err(SamplerError::Schedule("at least one step is required".into()));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(SamplerError::Schedule(format!(
            "need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let alpha_bars = alphas
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    let sigmas = betas.iter().map(|b| b.sqrt()).collect();
    Ok(NoiseSchedule {
        betas,
        alphas,
        alpha_bars,
        sigmas,
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// Same schedule with every `σ_t` set to zero (deterministic sampling).
    pub fn zero_variance(mut self) -> Self {
        self.sigmas.iter_mut().for_each(|s| *s = 0.0);
        self
    }

    fn index(&self, t: usize) -> Result<usize, SamplerError> {
        if t == 0 || t > self.steps() {
            return Err(SamplerError::StepOutOfRange { t, total: self.steps() });
        }
        Ok(t - 1)
    }

    pub fn alpha(&self, t: usize) -> Result<f64, SamplerError> {
        Ok(self.alphas[self.index(t)?])
    }

    /// `ᾱ_t`, with `ᾱ_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64, SamplerError> {
        if t == 0 {
            return Ok(1.0);
        }
        Ok(self.alpha_bars[self.index(t)?])
    }

    pub fn sigma(&self, t: usize) -> Result<f64, SamplerError> {
        Ok(self.sigmas[self.index(t)?])
    }
}

/// One reverse update
/// `z_{t−1} = (z_t − (1 − α_t)/√(1 − ᾱ_t) · ε̂)/√α_t + σ_t u`.
///
/// `σ` is forced to zero at `t = 1`. A generator is only required when the
/// step actually draws noise.
pub fn ddpm_step(
    z: &Latent,
    eps: &Latent,
    schedule: &NoiseSchedule,
    t: usize,
    rng: Option<&mut dyn RngCore>,
) -> Result<Latent, SamplerError> {
    z.check_shape(eps)?;
    let alpha = schedule.alpha(t)?;
    let ab = schedule.alpha_bar(t)?;
    let sigma = if t == 1 { 0.0 } else { schedule.sigma(t)? };
    let coef = (1.0 - alpha) / (1.0 - ab).sqrt();
    let inv = 1.0 / alpha.sqrt();
    let mut data: Vec<f64> = z.data.iter().zip(&eps.data).map(|(z, e)| (z - coef * e) * inv).collect();
    if sigma > 0.0 {
        let rng = rng.ok_or(SamplerError::NoRng(t))?;
        for x in &mut data {
            let u: f64 = StandardNormal.sample(rng);
            *x += sigma * u;
        }
    }
    Ok(Latent { data, ..*z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_step_schedule() {
        let s = make_schedule(1, 0.1, 0.1).unwrap();
        assert_eq!(s.alphas, vec![0.9]);
        assert_eq!(s.alpha_bars, vec![0.9]);
    }

    #[test]
    fn default_schedule_decays() {
        let s = make_schedule(1000, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap();
        assert!(s.alpha_bar(1000).unwrap() < 1e-4);
        assert!(s.alpha_bars.windows(2).all(|w| w[1] < w[0]));
        let prod: f64 = s.alphas.iter().product();
        assert!((prod - s.alpha_bars[999]).abs() < 1e-12);
        assert!(make_schedule(10, 0.2, 0.1).is_err());
        assert!(make_schedule(0, 0.1, 0.1).is_err());
    }

    #[test]
    fn zero_noise_step_rescales() {
        let s = make_schedule(10, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap().zero_variance();
        let z = Latent::new(2, 1, 1, vec![1.0, -2.0]).unwrap();
        let out = ddpm_step(&z, &Latent::zeros(2, 1, 1), &s, 5, None).unwrap();
        let a = s.alpha(5).unwrap().sqrt();
        assert_eq!(out.data, vec![1.0 / a, -2.0 / a]);
        assert!(matches!(
            ddpm_step(&z, &z, &s, 11, None),
            Err(SamplerError::StepOutOfRange { t: 11, .. })
        ));
    }

    #[test]
    fn oracle_noise_reconstructs() {
        let s = make_schedule(50, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap().zero_variance();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x0 = Latent::new(8, 8, 1, (0..64).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
        let mut z = Latent::new(8, 8, 1, (0..64).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
        for t in (1..=50).rev() {
            let ab = s.alpha_bar(t).unwrap();
            let eps = Latent {
                data: z
                    .data
                    .iter()
                    .zip(&x0.data)
                    .map(|(z, x)| (z - ab.sqrt() * x) / (1.0 - ab).sqrt())
                    .collect(),
                ..z
            };
            z = ddpm_step(&z, &eps, &s, t, None).unwrap();
        }
        assert!(z.max_abs_diff(&x0) < 1e-6);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let s = make_schedule(10, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap();
        let z = Latent::new(3, 1, 1, vec![0.1, 0.2, 0.3]).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            ddpm_step(&z, &z, &s, 7, Some(&mut rng)).unwrap()
        };
        assert_eq!(run().data, run().data);
        assert!(matches!(ddpm_step(&z, &z, &s, 7, None), Err(SamplerError::NoRng(7))));
    }
}
