use super::schedule::NoiseSchedule;
use super::SamplerError;
use crate::types::Raster;

/// Dense `H × W × C` latent, row-major with channels innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Latent {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, SamplerError> {
        if data.len() != width * height * channels {
            return Err(SamplerError::Shape(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_raster(r: &Raster) -> Self {
        Self {
            width: r.width,
            height: r.height,
            channels: r.channels,
            data: r.data.iter().map(|&x| x as f64).collect(),
        }
    }

    /// Identity decoder.
    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, o: &Latent) -> bool {
        (self.width, self.height, self.channels) == (o.width, o.height, o.channels)
    }

    pub fn check_shape(&self, o: &Latent) -> Result<(), SamplerError> {
        if self.same_shape(o) {
            Ok(())
        } else {
            Err(SamplerError::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, o.width, o.height, o.channels
            )))
        }
    }

    pub fn max_abs_diff(&self, o: &Latent) -> f64 {
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_mask(l: &Latent, mask: &[bool]) -> Result<(), SamplerError> {
    if mask.len() != l.pixels() {
        return Err(SamplerError::Shape(format!(
            "mask of {} pixels for a {}x{} latent",
            mask.len(),
            l.width,
            l.height
        )));
    }
    Ok(())
}

/// `m ⊙ known + (1 − m) ⊙ unknown`, with `mask` true on known pixels.
pub fn outpaint_fuse(known: &Latent, unknown: &Latent, mask: &[bool]) -> Result<Latent, SamplerError> {
    known.check_shape(unknown)?;
    check_mask(known, mask)?;
    let c = known.channels;
    let mut out = unknown.clone();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        out.data[i * c..(i + 1) * c].copy_from_slice(&known.data[i * c..(i + 1) * c]);
    }
    Ok(out)
}

/// Samples `q(z_t | z_0)`: `√ᾱ_t x + √(1 − ᾱ_t) n`. Step 0 returns `x`.
pub fn forward_noise(x: &Latent, schedule: &NoiseSchedule, t: usize, noise: &Latent) -> Result<Latent, SamplerError> {
    x.check_shape(noise)?;
    if t == 0 {
        return Ok(x.clone());
    }
    let ab = schedule.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = x.data.iter().zip(&noise.data).map(|(x, n)| a * x + b * n).collect();
    Ok(Latent { data, ..*x })
}

/// Circular column shift by `k` quarter widths: column `j` moves to
/// `(j + k·W/4) mod W`.
pub fn cycle_shift(z: &Latent, quarter_turns: i64) -> Result<Latent, SamplerError> {
    if z.width % 4 != 0 {
        return Err(SamplerError::IndivisibleWidth(z.width));
    }
    let w = z.width;
    let shift = (quarter_turns.rem_euclid(4) as usize) * (w / 4);
    if shift == 0 {
        return Ok(z.clone());
    }
    let c = z.channels;
    let mut out = z.clone();
    for v in 0..z.height {
        let row = &z.data[v * w * c..(v + 1) * w * c];
        let dst = &mut out.data[v * w * c..(v + 1) * w * c];
        dst[shift * c..].copy_from_slice(&row[..(w - shift) * c]);
        dst[..shift * c].copy_from_slice(&row[(w - shift) * c..]);
    }
    Ok(out)
}

/// [`cycle_shift`] for a per-pixel mask.
pub(crate) fn cycle_shift_mask(mask: &[bool], width: usize, quarter_turns: i64) -> Vec<bool> {
    let shift = (quarter_turns.rem_euclid(4) as usize) * (width / 4);
    let mut out = mask.to_vec();
    for (src_row, dst_row) in mask.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        for j in 0..width {
            dst_row[(j + shift) % width] = src_row[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, c: usize) -> Latent {
        Latent::new(w, h, c, (0..w * h * c).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn fuse_saturated_masks() {
        let (a, b) = (ramp(4, 2, 2), Latent::zeros(4, 2, 2));
        assert_eq!(outpaint_fuse(&a, &b, &[true; 8]).unwrap(), a);
        assert_eq!(outpaint_fuse(&a, &b, &[false; 8]).unwrap(), b);
    }

    #[test]
    fn fuse_checkerboard_and_idempotence() {
        let (a, b) = (ramp(4, 4, 3), Latent::new(4, 4, 3, vec![-1.0; 48]).unwrap());
        let m: Vec<bool> = (0..16).map(|i| (i % 4 + i / 4) % 2 == 0).collect();
        let f = outpaint_fuse(&a, &b, &m).unwrap();
        for (i, &known) in m.iter().enumerate() {
            let src = if known { &a } else { &b };
            assert_eq!(f.data[i * 3..i * 3 + 3], src.data[i * 3..i * 3 + 3]);
        }
        let g = outpaint_fuse(&a, &f, &m).unwrap();
        assert_eq!(f, g);
        assert!(outpaint_fuse(&a, &b, &m[..3]).is_err());
    }

    #[test]
    fn quarter_shift_on_width_eight() {
        let z = ramp(8, 1, 1);
        let s = cycle_shift(&z, 1).unwrap();
        for j in 0..8 {
            assert_eq!(s.data[(j + 2) % 8], z.data[j]);
        }
    }

    #[test]
    fn shift_group_properties() {
        let z = ramp(8, 3, 2);
        assert_eq!(cycle_shift(&z, 4).unwrap(), z);
        let mut x = z.clone();
        for _ in 0..4 {
            x = cycle_shift(&x, 1).unwrap();
        }
        assert_eq!(x, z);
        assert_eq!(cycle_shift(&cycle_shift(&z, 2).unwrap(), 2).unwrap(), z);
        assert_eq!(cycle_shift(&cycle_shift(&z, 3).unwrap(), -3).unwrap(), z);
        assert!(matches!(cycle_shift(&ramp(6, 1, 1), 1), Err(SamplerError::IndivisibleWidth(6))));
    }

    #[test]
    fn mask_shift_matches_latent_shift() {
        let m: Vec<bool> = (0..16).map(|i| i % 3 == 0).collect();
        let z = Latent::new(8, 2, 1, m.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let sm = cycle_shift_mask(&m, 8, 3);
        let sz = cycle_shift(&z, 3).unwrap();
        assert_eq!(sm, sz.data.iter().map(|&x| x == 1.0).collect::<Vec<_>>());
    }
}
