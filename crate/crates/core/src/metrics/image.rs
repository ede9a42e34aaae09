use super::MetricsError;
use crate::types::Raster;

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_shape(a: &Raster, b: &Raster) -> Result<(), MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::Shape(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    Ok(())
}

/// `10·log10(peak²/MSE)` in decibels; identical images give `+∞`.
pub fn psnr(a: &Raster, b: &Raster, peak: f64) -> Result<f64, MetricsError> {
    check_shape(a, b)?;
    if a.data.is_empty() {
        return Err(MetricsError::Shape("empty images".into()));
    }
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|x| x / s).collect()
}

/// Separable valid-region filtering of a single-channel plane.
fn filter(plane: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for v in 0..h {
        for u in 0..ow {
            rows[v * ow + u] = k.iter().enumerate().map(|(i, c)| c * plane[v * w + u + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for v in 0..oh {
        for u in 0..ow {
            out[v * ow + u] = k.iter().enumerate().map(|(i, c)| c * rows[(v + i) * ow + u]).sum();
        }
    }
    out
}

/// Mean SSIM over all fully covered window positions, averaged over
/// channels. Constants assume values in `[0, 1]`.
pub fn ssim(a: &Raster, b: &Raster) -> Result<f64, MetricsError> {
    check_shape(a, b)?;
    let (w, h, c) = (a.width, a.height, a.channels);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = (0..w * h).map(|i| a.data[i * c + ch] as f64).collect();
        let pb: Vec<f64> = (0..w * h).map(|i| b.data[i * c + ch] as f64).collect();
        let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
        let (mu_a, mu_b) = (filter(&pa, w, h, &k), filter(&pb, w, h, &k));
        let (e_aa, e_bb, e_ab) = (
            filter(&prod(&pa, &pa), w, h, &k),
            filter(&prod(&pb, &pb), w, h, &k),
            filter(&prod(&pa, &pb), w, h, &k),
        );
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, 3, |u, v, p| {
            for (c, x) in p.iter_mut().enumerate() {
                *x = (((u * 3 + v * 5 + c * 7) % 17) as f32) / 16.0;
            }
        })
    }

    #[test]
    fn psnr_reference_values() {
        let a = pattern(8, 8);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let mut b = a.clone();
        b.data.iter_mut().for_each(|x| *x += 0.1);
        // the offset is 0.1 only up to f32 rounding
        let mse = a.data.iter().zip(&b.data).map(|(x, y)| (*y as f64 - *x as f64).powi(2)).sum::<f64>() / a.data.len() as f64;
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 10.0 * (1.0 / mse).log10()).abs() < 1e-12);
        assert!((p - 20.0).abs() < 1e-4);
        assert_eq!(p, psnr(&b, &a, 1.0).unwrap());
        assert!(psnr(&a, &pattern(8, 9), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let a = pattern(24, 20);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let bin = Raster::from_fn(16, 16, 1, |u, v, p| p[0] = ((u / 2 + v / 3) % 2) as f32);
        let inv = Raster {
            data: bin.data.iter().map(|x| 1.0 - x).collect(),
            ..bin.clone()
        };
        assert!(ssim(&bin, &inv).unwrap() < 0.0);
    }

    #[test]
    fn ssim_is_flip_invariant() {
        let a = pattern(20, 16);
        let b = Raster {
            data: a.data.iter().enumerate().map(|(i, x)| (x + (i % 5) as f32 * 0.03).min(1.0)).collect(),
            ..a.clone()
        };
        let s = ssim(&a, &b).unwrap();
        assert!(s < 1.0);
        assert!((s - ssim(&a.flip_horizontal(), &b.flip_horizontal()).unwrap()).abs() < 1e-12);
        assert!((s - ssim(&a.flip_vertical(), &b.flip_vertical()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_brute_force_window() {
        // one window position: the whole 11x11 image
        let a = Raster::from_fn(11, 11, 1, |u, v, p| p[0] = ((u * v) % 7) as f32 / 6.0);
        let b = Raster::from_fn(11, 11, 1, |u, v, p| p[0] = ((u + 2 * v) % 5) as f32 / 4.0);
        let k = gaussian_kernel();
        let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for v in 0..11 {
            for u in 0..11 {
                let g = k[u] * k[v];
                let (x, y) = (a.get(u, v, 0) as f64, b.get(u, v, 0) as f64);
                ma += g * x;
                mb += g * y;
                aa += g * x * x;
                bb += g * y * y;
                ab += g * x * y;
            }
        }
        let want = ((2.0 * ma * mb + C1) * (2.0 * (ab - ma * mb) + C2))
            / ((ma * ma + mb * mb + C1) * (aa - ma * ma + bb - mb * mb + C2));
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-12);
        assert!(matches!(ssim(&pattern(10, 20), &pattern(10, 20)), Err(MetricsError::TooSmall { .. })));
    }
}
