use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::types::{CameraIntrinsics, CameraPose};

pub const DEFAULT_T_ERROR: f64 = 2.5;
pub const DEFAULT_T_MATCH: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Match {
    pub source: [f64; 2],
    pub target: [f64; 2],
}

/// Matched continuous pixels between a source and a target view.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correspondences {
    pub matches: Vec<Match>,
}

impl Correspondences {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn check_bounds(&self, ka: &CameraIntrinsics, kb: &CameraIntrinsics) -> Result<(), MetricsError> {
        let inside = |p: [f64; 2], k: &CameraIntrinsics| {
            (0.0..=k.width as f64).contains(&p[0]) && (0.0..=k.height as f64).contains(&p[1])
        };
        match self.matches.iter().position(|m| !inside(m.source, ka) || !inside(m.target, kb)) {
            Some(i) => Err(MetricsError::Invalid(format!("match {i} lies outside its image"))),
            None => Ok(()),
        }
    }
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// `F = K_b⁻ᵀ [t]_× R K_a⁻¹` for the relative pose `X_b = R X_a + t`,
/// as returned by [`CameraPose::relative_pose`].
pub fn fundamental_matrix(
    rel: &CameraPose,
    ka: &CameraIntrinsics,
    kb: &CameraIntrinsics,
) -> Result<Matrix3<f64>, MetricsError> {
    if rel.translation.norm() < 1e-12 {
        return Err(MetricsError::DegenerateEssential);
    }
    Ok(kb.inverse().transpose() * skew(&rel.translation) * rel.matrix() * ka.inverse())
}

fn line_distance(l: &Vector3<f64>, p: [f64; 2]) -> f64 {
    (l.x * p[0] + l.y * p[1] + l.z).abs() / l.x.hypot(l.y)
}

/// Per match, the target's distance to the epiline of the source plus the
/// source's distance to the epiline of the target, in pixels.
pub fn symmetric_epipolar_distance(
    matches: &Correspondences,
    rel: &CameraPose,
    ka: &CameraIntrinsics,
    kb: &CameraIntrinsics,
) -> Result<Vec<f64>, MetricsError> {
    let f = fundamental_matrix(rel, ka, kb)?;
    Ok(matches
        .matches
        .iter()
        .map(|m| {
            let xa = Vector3::new(m.source[0], m.source[1], 1.0);
            let xb = Vector3::new(m.target[0], m.target[1], 1.0);
            line_distance(&(f * xa), m.target) + line_distance(&(f.transpose() * xb), m.source)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MtsedPair {
    /// `NaN` without matches.
    pub median: f64,
    pub count: usize,
    pub pass: bool,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// A pair passes when the median symmetric distance is below `t_error`
/// and there are more than `t_match` matches.
pub fn mtsed_pair(
    matches: &Correspondences,
    rel: &CameraPose,
    ka: &CameraIntrinsics,
    kb: &CameraIntrinsics,
    t_error: f64,
    t_match: usize,
) -> Result<MtsedPair, MetricsError> {
    let d = symmetric_epipolar_distance(matches, rel, ka, kb)?;
    let count = d.len();
    let median = median(d);
    Ok(MtsedPair {
        median,
        count,
        pass: median < t_error && count > t_match,
    })
}

/// Fraction of consecutive-frame pairs that pass. Each entry holds the
/// matches between frames `i` and `i + 1` and their relative pose.
pub fn mtsed_sequence(
    pairs: &[(Correspondences, CameraPose)],
    k: &CameraIntrinsics,
    t_error: f64,
    t_match: usize,
) -> Result<(f64, Vec<MtsedPair>), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let results = pairs
        .par_iter()
        .map(|(m, rel)| mtsed_pair(m, rel, k, k, t_error, t_match))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = results.iter().filter(|r| r.pass).count();
    Ok((passed as f64 / results.len() as f64, results))
}

/// Pixels of world points seen by a camera; `None` behind it.
pub fn project_points(points: &[Vector3<f64>], pose: &CameraPose, k: &CameraIntrinsics) -> Vec<Option<[f64; 2]>> {
    points
        .iter()
        .map(|p| k.project(&pose.world_to_camera(p)).map(|(x, y)| [x, y]))
        .collect()
}

/// Exact matches from a z-depth map of view `a` (row-major, `ka` sized),
/// sampled every `stride` pixels and kept when they land inside view `b`.
pub fn synthetic_correspondences(
    depth: &[f64],
    ka: &CameraIntrinsics,
    pose_a: &CameraPose,
    kb: &CameraIntrinsics,
    pose_b: &CameraPose,
    stride: usize,
) -> Result<Correspondences, MetricsError> {
    if depth.len() != ka.width * ka.height {
        return Err(MetricsError::Shape(format!(
            "{} depths for a {}x{} view",
            depth.len(),
            ka.width,
            ka.height
        )));
    }
    let stride = stride.max(1);
    let mut matches = Vec::new();
    for v in (0..ka.height).step_by(stride) {
        for u in (0..ka.width).step_by(stride) {
            let z = depth[v * ka.width + u];
            if !(z.is_finite() && z > 0.0) {
                continue;
            }
            let (x, y) = (u as f64 + 0.5, v as f64 + 0.5);
            let world = pose_a.camera_to_world(&(ka.unproject(x, y) * z));
            if let Some((bx, by)) = kb.project(&pose_b.world_to_camera(&world)) {
                if (0.0..kb.width as f64).contains(&bx) && (0.0..kb.height as f64).contains(&by) {
                    matches.push(Match {
                        source: [x, y],
                        target: [bx, by],
                    });
                }
            }
        }
    }
    Ok(Correspondences { matches })
}
