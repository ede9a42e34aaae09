use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::latent::Latent;

/// Independent noise streams of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Initial `z_T` of a frame.
    Init(usize),
    /// Reverse-step noise `u_t` of a frame.
    Reverse(usize),
    /// Forward noise of a frame's known path.
    Known(usize),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init(f) => (f as u64) << 2,
            Stream::Reverse(f) => ((f as u64) << 2) | 1,
            Stream::Known(f) => ((f as u64) << 2) | 2,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator keyed by `(seed, stream, step)`, so a draw never depends on
/// how many values other frames or threads consumed.
pub fn step_rng(seed: u64, stream: Stream, step: usize) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ stream.tag()) ^ step as u64);
    ChaCha8Rng::seed_from_u64(key)
}

pub fn gaussian_latent(width: usize, height: usize, channels: usize, rng: &mut ChaCha8Rng) -> Latent {
    Latent {
        width,
        height,
        channels,
        data: (0..width * height * channels).map(|_| StandardNormal.sample(rng)).collect(),
    }
}
