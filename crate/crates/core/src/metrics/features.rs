use super::MetricsError;
use crate::types::Raster;

const GRID: usize = 8;
pub const SYNTHETIC_FEATURE_DIM: usize = GRID * GRID * 2;

/// Aggregates one sequence of frame features into a single vector.
///
/// Frames are unit-normalized, then the mean frame and the mean
/// adjacent-frame difference are concatenated, and the result is scaled
/// back by the mean frame norm. Output length is twice the frame length.
pub fn sequence_feature(frames: &[Vec<f64>]) -> Result<Vec<f64>, MetricsError> {
    let first = frames.first().ok_or(MetricsError::TooFewSamples { need: 1, got: 0 })?;
    let d = first.len();
    if let Some(i) = frames.iter().position(|f| f.len() != d) {
        return Err(MetricsError::Shape(format!("frame {i} has {} values, expected {d}", frames[i].len())));
    }
    let norms: Vec<f64> = frames.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let unit: Vec<Vec<f64>> = frames
        .iter()
        .zip(&norms)
        .map(|(f, &n)| if n > 0.0 { f.iter().map(|x| x / n).collect() } else { f.clone() })
        .collect();
    let n = frames.len() as f64;
    let scale = norms.iter().sum::<f64>() / n;
    let mut out = vec![0.0; 2 * d];
    for f in &unit {
        for (o, x) in out[..d].iter_mut().zip(f) {
            *o += x / n;
        }
    }
    if unit.len() > 1 {
        let m = (unit.len() - 1) as f64;
        for w in unit.windows(2) {
            for (o, (a, b)) in out[d..].iter_mut().zip(w[0].iter().zip(&w[1])) {
                *o += (b - a) / m;
            }
        }
    }
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

/// One aggregated vector per sequence.
pub fn video_feature_stack(sequences: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, MetricsError> {
    let out = sequences.iter().map(|s| sequence_feature(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(first) = out.first() {
        if out.iter().any(|f| f.len() != first.len()) {
            return Err(MetricsError::Shape("sequences have different frame feature lengths".into()));
        }
    }
    Ok(out)
}

/// Luminance mean and variance on an 8×8 grid of cells, luminance being
/// the channel mean. Cells are the integer-rounded partitions of the image.
pub fn synthetic_frame_features(image: &Raster) -> Result<Vec<f64>, MetricsError> {
    if image.width < GRID || image.height < GRID {
        return Err(MetricsError::TooSmall {
            width: image.width,
            height: image.height,
            window: GRID,
        });
    }
    let mut out = Vec::with_capacity(SYNTHETIC_FEATURE_DIM);
    for gy in 0..GRID {
        let (v0, v1) = (gy * image.height / GRID, (gy + 1) * image.height / GRID);
        for gx in 0..GRID {
            let (u0, u1) = (gx * image.width / GRID, (gx + 1) * image.width / GRID);
            let lum: Vec<f64> = (v0..v1)
                .flat_map(|v| (u0..u1).map(move |u| (u, v)))
                .map(|(u, v)| image.pixel(u, v).iter().map(|&x| x as f64).sum::<f64>() / image.channels as f64)
                .collect();
            let mean = lum.iter().sum::<f64>() / lum.len() as f64;
            let var = lum.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / lum.len() as f64;
            out.extend([mean, var]);
        }
    }
    Ok(out)
}
