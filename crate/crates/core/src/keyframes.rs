//! Keyframe pairs cut from a panorama, and depth-based forward warping.
//!
//! Two pair kinds exist: neighbouring views that differ by a pure yaw about
//! the panorama centre, and walk-in pairs whose target is a zoomed-in view
//! with an unknown periphery left for the video sampler to outpaint.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projection::{
    direction_to_lon_lat, pano_to_perspective, split_panorama, world_to_sphere_dir, ProjectionError, ViewWindow,
};
use crate::types::{lon_lat_to_pixel, CameraIntrinsics, CameraPose, CoreError, DepthMap, PanoramaImage, PerspectiveImage, Raster};

#[derive(Debug, Error, PartialEq)]
pub enum KeyframeError {
    #[error("walk-in ratio {0} leaves no field of view (singular scale)")]
    SingularScale(f64),
    #[error("invalid walk-in parameters: {0}")]
    InvalidWalkIn(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRelation {
    Neighboring,
    WalkIn,
}

#[derive(Clone, Debug)]
pub struct KeyframePair {
    pub source: PerspectiveImage,
    pub source_pose: CameraPose,
    pub target: PerspectiveImage,
    pub target_pose: CameraPose,
    /// `true` where the target is unknown and must be synthesized.
    pub target_inpaint_mask: Vec<bool>,
    pub relation: PairRelation,
    pub intrinsics: CameraIntrinsics,
}

impl KeyframePair {
    pub fn inpaint_area(&self) -> usize {
        self.target_inpaint_mask.iter().filter(|&&m| m).count()
    }
}

/// Focal length of the zoomed crop simulating a walk of `target_distance`
/// into a scene of depth `max_depth`: `f / tan((1 - c)·β/2)`, `c = d̂/d_max`.
pub fn walk_in_scale(target_distance: f64, max_depth: f64, focal: f64, hfov: f64) -> Result<f64, KeyframeError> {
    if !(max_depth > 0.0 && max_depth.is_finite()) {
        return Err(KeyframeError::InvalidWalkIn(format!("max depth {max_depth} must be positive")));
    }
    if !(hfov > 0.0 && hfov < std::f64::consts::PI) {
        return Err(KeyframeError::InvalidWalkIn(format!("fov {hfov} outside (0, π)")));
    }
    if !(target_distance >= 0.0) {
        return Err(KeyframeError::InvalidWalkIn(format!(
            "target distance {target_distance} must be non-negative"
        )));
    }
    let c = target_distance / max_depth;
    if c >= 1.0 {
        return Err(KeyframeError::SingularScale(c));
    }
    Ok(focal / ((1.0 - c) * hfov / 2.0).tan())
}

/// Side ratio of the known centre rectangle left by a walk-in of ratio `c`:
/// `tan((1 - c)·β/2) / tan(β/2)`.
pub fn walk_in_known_ratio(c: f64, hfov: f64) -> Result<f64, KeyframeError> {
    let half = (hfov / 2.0).tan();
    let s = walk_in_scale(c, 1.0, 1.0, hfov)?;
    Ok(1.0 / (s * half))
}

/// Per-source-pixel landing positions and target-grid occupancy.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpField {
    pub source_width: usize,
    pub source_height: usize,
    /// Continuous target coordinates, `None` when the pixel leaves the frame.
    pub coords: Vec<Option<(f64, f64)>>,
    pub target_width: usize,
    pub target_height: usize,
    /// Number of source pixels landing in each target pixel.
    pub hits: Vec<u32>,
    /// Hit mask after hole closing (`M_warp`).
    pub occupancy: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpOptions {
    /// Apply one 3×3 morphological closing to the occupancy mask.
    pub close_holes: bool,
}

impl Default for WarpOptions {
    fn default() -> Self {
        Self { close_holes: true }
    }
}

#[derive(Clone, Debug)]
pub struct WarpResult {
    pub image: PerspectiveImage,
    pub field: WarpField,
    /// Complement of `field.occupancy`.
    pub inpaint_mask: Vec<bool>,
    /// Raised when no source pixel landed inside the target frame.
    pub all_outside: bool,
}

/// Forward-warps `source` with per-pixel z-depth into the camera at
/// `target_pose` (both cameras share `k`).
///
/// Each pixel is back-projected, moved through the relative rigid transform
/// and splatted to the nearest target pixel. Collisions keep the smallest
/// target depth; exact ties keep the earlier source pixel.
pub fn forward_warp(
    source: &PerspectiveImage,
    depth: &DepthMap,
    source_pose: &CameraPose,
    target_pose: &CameraPose,
    k: &CameraIntrinsics,
    options: WarpOptions,
) -> Result<WarpResult, KeyframeError> {
    let (w, h, ch) = (source.width(), source.height(), source.raster.channels);
    if depth.width != w || depth.height != h {
        return Err(KeyframeError::Shape(format!(
            "depth {}x{} vs source {}x{}",
            depth.width, depth.height, w, h
        )));
    }
    if k.width != w || k.height != h {
        return Err(KeyframeError::Shape(format!(
            "intrinsics {}x{} vs source {}x{}",
            k.width, k.height, w, h
        )));
    }
    let (rot, trans) = source_pose.relative_to(target_pose);
    let mut coords = vec![None; w * h];
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut winner = vec![usize::MAX; w * h];
    let mut hits = vec![0u32; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if !source.is_valid(u, v) {
                continue;
            }
            let p = k.unproject(u as f64 + 0.5, v as f64 + 0.5) * depth.get(u, v);
            let q = rot * p + trans;
            let Some((x, y)) = k.project(&q) else { continue };
            if !(x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64) {
                continue;
            }
            coords[i] = Some((x, y));
            let t = (y.floor() as usize) * w + x.floor() as usize;
            hits[t] += 1;
            if q.z < zbuf[t] {
                zbuf[t] = q.z;
                winner[t] = i;
            }
        }
    }
    let hit_mask: Vec<bool> = hits.iter().map(|&n| n > 0).collect();
    let all_outside = !hit_mask.iter().any(|&b| b);
    if all_outside {
        log::warn!("forward warp: every source pixel landed outside the target frame");
    }
    let occupancy = if options.close_holes {
        close3x3(&hit_mask, w, h)
    } else {
        hit_mask.clone()
    };
    let mut raster = Raster::zeros(w, h, ch);
    for t in 0..w * h {
        if winner[t] != usize::MAX {
            let s = winner[t] * ch;
            raster.data[t * ch..(t + 1) * ch].copy_from_slice(&source.raster.data[s..s + ch]);
        }
    }
    // closing-filled holes take the mean of their hit neighbours
    for v in 0..h {
        for u in 0..w {
            let t = v * w + u;
            if !occupancy[t] || hit_mask[t] {
                continue;
            }
            let mut acc = vec![0.0f64; ch];
            let mut n = 0.0;
            for (nu, nv) in neighbours3x3(u, v, w, h) {
                let j = nv * w + nu;
                if hit_mask[j] {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += raster.data[j * ch + c] as f64;
                    }
                    n += 1.0;
                }
            }
            for (c, a) in acc.iter().enumerate() {
                raster.data[t * ch + c] = (a / n) as f32;
            }
        }
    }
    let inpaint_mask: Vec<bool> = occupancy.iter().map(|&o| !o).collect();
    let image = PerspectiveImage::with_mask(raster, occupancy.clone())?;
    Ok(WarpResult {
        image,
        field: WarpField {
            source_width: w,
            source_height: h,
            coords,
            target_width: w,
            target_height: h,
            hits,
            occupancy,
        },
        inpaint_mask,
        all_outside,
    })
}

fn neighbours3x3(u: usize, v: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let (u, v) = (u as i64, v as i64);
    (-1..=1i64)
        .flat_map(move |dv| (-1..=1i64).map(move |du| (u + du, v + dv)))
        .filter(move |&(x, y)| x >= 0 && y >= 0 && x < w as i64 && y < h as i64)
        .map(|(x, y)| (x as usize, y as usize))
}

/// 3×3 closing. Out-of-frame pixels are ignored, so the result always
/// contains the input.
pub fn close3x3(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let dilated: Vec<bool> = (0..w * h)
        .map(|i| neighbours3x3(i % w, i / w, w, h).any(|(u, v)| mask[v * w + u]))
        .collect();
    (0..w * h)
        .map(|i| neighbours3x3(i % w, i / w, w, h).all(|(u, v)| dilated[v * w + u]))
        .collect()
}

/// Consecutive panorama views paired by pure rotation about the centre.
/// When the views wrap the full circle the last view pairs back to the first.
pub fn build_neighboring_pairs(
    pano: &PanoramaImage,
    n_views: usize,
    overlap_fraction: f64,
    hfov: f64,
    out_width: usize,
    out_height: usize,
) -> Result<Vec<KeyframePair>, KeyframeError> {
    let split = split_panorama(pano, n_views, overlap_fraction, hfov, out_width, out_height)?;
    let n = split.views.len();
    let n_pairs = if split.full_coverage { n } else { n - 1 };
    let center = Vector3::zeros();
    Ok((0..n_pairs)
        .map(|i| {
            let (src, sw) = &split.views[i];
            let (tgt, tw) = &split.views[(i + 1) % n];
            KeyframePair {
                source: src.clone(),
                source_pose: sw.pose(center),
                target: tgt.clone(),
                target_pose: tw.pose(center),
                target_inpaint_mask: vec![false; out_width * out_height],
                relation: PairRelation::Neighboring,
                intrinsics: sw.intrinsics(),
            }
        })
        .collect())
}

/// How the scene depth along the view axis is read from the depth map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisDepth {
    #[default]
    CentralPixel,
    /// 10th percentile over the central third of the frame.
    CentralPercentile,
}

pub fn axis_depth(depth: &DepthMap, mode: AxisDepth) -> f64 {
    match mode {
        AxisDepth::CentralPixel => depth.get(depth.width / 2, depth.height / 2),
        AxisDepth::CentralPercentile => {
            let (w, h) = (depth.width, depth.height);
            let mut vals: Vec<f64> = (h / 3..(2 * h).div_ceil(3).max(h / 3 + 1))
                .flat_map(|v| (w / 3..(2 * w).div_ceil(3).max(w / 3 + 1)).map(move |u| (u, v)))
                .map(|(u, v)| depth.get(u.min(w - 1), v.min(h - 1)))
                .collect();
            vals.sort_by(|a, b| a.total_cmp(b));
            vals[((vals.len() - 1) as f64 * 0.1).round() as usize]
        }
    }
}

/// Z-depth of a pinhole view read from an equirectangular distance map.
pub fn window_depth(depth: &DepthMap, pose: &CameraPose, k: &CameraIntrinsics) -> Result<DepthMap, KeyframeError> {
    let r = pose.matrix();
    let data = (0..k.width * k.height)
        .map(|i| {
            let ray = k.unproject((i % k.width) as f64 + 0.5, (i / k.width) as f64 + 0.5);
            let (lon, lat) = direction_to_lon_lat(&world_to_sphere_dir(&(r * ray)));
            let (x, y) = lon_lat_to_pixel(lon, lat, depth.width, depth.height);
            depth.sample_equirect(x, y) / ray.norm()
        })
        .collect();
    Ok(DepthMap::from_samples(k.width, k.height, data)?)
}

/// Walk-in pair along `window`'s view direction.
///
/// The source is the panorama view at the centre. The target pose moves
/// forward by `c · D` (`D` read from `depth`); its image keeps the source
/// content inside a centred rectangle of side ratio
/// `tan((1 - c)·β/2) / tan(β/2)` and marks the surrounding border unknown.
pub fn build_walkin_pair(
    pano: &PanoramaImage,
    depth: &DepthMap,
    window: &ViewWindow,
    walk_ratio: f64,
    depth_mode: AxisDepth,
) -> Result<KeyframePair, KeyframeError> {
    if !(0.0..1.0).contains(&walk_ratio) {
        return Err(if walk_ratio >= 1.0 {
            KeyframeError::SingularScale(walk_ratio)
        } else {
            KeyframeError::InvalidWalkIn(format!("walk ratio {walk_ratio} outside [0, 1)"))
        });
    }
    if depth.width != window.out_width || depth.height != window.out_height {
        return Err(KeyframeError::Shape(format!(
            "depth {}x{} vs window {}x{}",
            depth.width, depth.height, window.out_width, window.out_height
        )));
    }
    let k = window.intrinsics();
    let (source, _) = pano_to_perspective(pano, window);
    let source_pose = window.pose(Vector3::zeros());
    let scene_depth = axis_depth(depth, depth_mode);
    let scale = walk_in_scale(walk_ratio * scene_depth, scene_depth, k.fx, window.hfov)?;
    let ratio = k.fx / (scale * (window.hfov / 2.0).tan());

    let forward = source_pose.matrix() * Vector3::z();
    let target_pose = CameraPose::new(
        source_pose.rotation(),
        source_pose.translation + forward * (walk_ratio * scene_depth),
    )?;

    let (w, h, ch) = (window.out_width, window.out_height, source.raster.channels);
    let mut target = Raster::zeros(w, h, ch);
    let mut inpaint = vec![true; w * h];
    let mut px = vec![0.0f64; ch];
    for v in 0..h {
        for u in 0..w {
            let xs = k.cx + (u as f64 + 0.5 - k.cx) / ratio;
            let ys = k.cy + (v as f64 + 0.5 - k.cy) / ratio;
            if xs < 0.0 || ys < 0.0 || xs > w as f64 || ys > h as f64 {
                continue;
            }
            source.raster.sample_bilinear_clamped(xs, ys, &mut px);
            for (o, p) in target.pixel_mut(u, v).iter_mut().zip(&px) {
                *o = *p as f32;
            }
            inpaint[v * w + u] = false;
        }
    }
    let known: Vec<bool> = inpaint.iter().map(|&m| !m).collect();
    Ok(KeyframePair {
        source,
        source_pose,
        target: PerspectiveImage::with_mask(target, known)?,
        target_pose,
        target_inpaint_mask: inpaint,
        relation: PairRelation::WalkIn,
        intrinsics: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Quaternion;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn textured(w: usize, h: usize) -> PerspectiveImage {
        PerspectiveImage::new(Raster::from_fn(w, h, 1, |u, v, px| {
            px[0] = ((u * 7 + v * 13) % 17) as f32 / 16.0;
        }))
    }

    fn pano() -> PanoramaImage {
        PanoramaImage::from_lon_lat(256, 3, |lon, lat, px| {
            px[0] = (0.5 + 0.4 * lon.sin() * lat.cos()) as f32;
            px[1] = (0.5 + 0.4 * (2.0 * lon).cos()) as f32;
            px[2] = (0.5 + 0.4 * lat.sin()) as f32;
        })
        .unwrap()
    }

    #[test]
    fn scale_without_walk_is_focal_over_half_fov() {
        let s = walk_in_scale(0.0, 5.0, 300.0, 1.2).unwrap();
        assert!((s - 300.0 / 0.6f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn scale_at_paper_ratio() {
        let s = walk_in_scale(4.0, 5.0, 256.0, FRAC_PI_2).unwrap();
        assert!((s - 256.0 / 9f64.to_radians().tan()).abs() < 1e-9);
        assert!((s - 1616.3).abs() < 0.5);
    }

    #[test]
    fn scale_is_increasing_in_ratio() {
        let mut prev = 0.0;
        for i in 0..100 {
            let c = i as f64 / 100.0;
            let s = walk_in_scale(c, 1.0, 256.0, FRAC_PI_2).unwrap();
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn scale_singular_at_full_depth() {
        assert_eq!(
            walk_in_scale(5.0, 5.0, 1.0, 1.0),
            Err(KeyframeError::SingularScale(1.0))
        );
    }

    #[test]
    fn identity_warp() {
        let k = CameraIntrinsics::from_fov(1.2, 1.0, 24, 20).unwrap();
        let src = textured(24, 20);
        let depth = DepthMap::from_samples(24, 20, (0..480).map(|i| 1.0 + (i % 5) as f64).collect()).unwrap();
        let pose = CameraPose::new(
            Quaternion::from_axis_angle(Vector3::new(0.1, 1.0, 0.0), 0.7),
            Vector3::new(1.0, 2.0, 0.5),
        )
        .unwrap();
        let r = forward_warp(&src, &depth, &pose, &pose, &k, WarpOptions::default()).unwrap();
        assert!(r.inpaint_mask.iter().all(|&m| !m));
        assert_eq!(r.image.raster, src.raster);
    }

    #[test]
    fn planar_translation_shifts_uniformly() {
        let k = CameraIntrinsics::new(40.0, 40.0, 16.0, 16.0, 32, 32).unwrap();
        let d = 4.0;
        let depth = DepthMap::constant(32, 32, d).unwrap();
        let src_pose = CameraPose::identity();
        let dx = 0.5;
        // camera moves along its own x axis
        let tgt_pose = CameraPose::new(Quaternion::IDENTITY, Vector3::new(dx, 0.0, 0.0)).unwrap();
        let r = forward_warp(&textured(32, 32), &depth, &src_pose, &tgt_pose, &k, WarpOptions::default()).unwrap();
        let shift = -k.fx * dx / d;
        for v in 0..32 {
            for u in 0..32 {
                if let Some((x, y)) = r.field.coords[v * 32 + u] {
                    assert!((x - (u as f64 + 0.5 + shift)).abs() < 0.5);
                    assert!((y - (v as f64 + 0.5)).abs() < 0.5);
                }
            }
        }
        // right border band of width |shift| = 5 px is unknown
        for v in 0..32 {
            for u in 0..32 {
                assert_eq!(r.inpaint_mask[v * 32 + u], u >= 27, "u={u} v={v}");
            }
        }
    }

    #[test]
    fn inpaint_mask_is_complement_of_occupancy() {
        let k = CameraIntrinsics::from_fov(1.0, 1.0, 16, 16).unwrap();
        let depth = DepthMap::from_samples(16, 16, (0..256).map(|i| 2.0 + (i % 3) as f64).collect()).unwrap();
        let tgt = CameraPose::new(
            Quaternion::from_axis_angle(Vector3::y(), 0.2),
            Vector3::new(0.3, -0.1, 0.4),
        )
        .unwrap();
        let r = forward_warp(&textured(16, 16), &depth, &CameraPose::identity(), &tgt, &k, WarpOptions::default()).unwrap();
        for (m, o) in r.inpaint_mask.iter().zip(&r.field.occupancy) {
            assert_eq!(*m, !*o);
        }
        let raw = forward_warp(
            &textured(16, 16),
            &depth,
            &CameraPose::identity(),
            &tgt,
            &k,
            WarpOptions { close_holes: false },
        )
        .unwrap();
        for (o, n) in raw.field.occupancy.iter().zip(&raw.field.hits) {
            assert_eq!(*o, *n > 0);
        }
    }

    #[test]
    fn zbuffer_keeps_nearest() {
        // two source pixels land on the same target pixel: the nearer wins
        let k = CameraIntrinsics::new(10.0, 10.0, 1.0, 0.5, 2, 1).unwrap();
        let src = PerspectiveImage::new(Raster::new(2, 1, 1, vec![0.25, 0.75]).unwrap());
        // pixel 0 ray x = -0.05 at depth 2 → X = -0.1; pixel 1 ray x = 0.05 at depth 1 → X = 0.05
        let depth = DepthMap::new(2, 1, vec![2.0, 1.0], 2.0).unwrap();
        // shift target so both land in pixel 0 or 1 region; check winner is the smaller depth
        let r = forward_warp(&src, &depth, &CameraPose::identity(), &CameraPose::identity(), &k, WarpOptions { close_holes: false }).unwrap();
        assert_eq!(r.image.raster.data, vec![0.25, 0.75]);
        let depth_same = DepthMap::new(2, 1, vec![1.0, 1.0], 1.0).unwrap();
        let k_wide = CameraIntrinsics::new(0.1, 0.1, 1.0, 0.5, 2, 1).unwrap();
        let r = forward_warp(&src, &depth_same, &CameraPose::identity(), &CameraPose::identity(), &k_wide, WarpOptions { close_holes: false }).unwrap();
        assert_eq!(r.field.hits, vec![1, 1]);
    }

    #[test]
    fn closing_fills_single_pixel_holes_only() {
        let (w, h) = (7, 7);
        let mut m = vec![true; w * h];
        m[3 * w + 3] = false;
        assert!(close3x3(&m, w, h).iter().all(|&b| b));
        let mut big = vec![true; w * h];
        for v in 1..6 {
            for u in 1..6 {
                big[v * w + u] = false;
            }
        }
        let closed = close3x3(&big, w, h);
        assert!(!closed[3 * w + 3]);
    }

    #[test]
    fn neighboring_pairs_close_the_loop() {
        let pairs = build_neighboring_pairs(&pano(), 6, 0.0, PI / 3.0, 16, 16).unwrap();
        assert_eq!(pairs.len(), 6);
        for p in &pairs {
            assert_eq!(p.source_pose.translation, p.target_pose.translation);
            assert_eq!(p.inpaint_area(), 0);
            let angle = p.source_pose.rotation().angle_to(p.target_pose.rotation());
            assert!((angle - PI / 3.0).abs() < 1e-9);
            let (_, t) = p.source_pose.relative_to(&p.target_pose);
            assert_eq!(t, Vector3::zeros());
        }
        // pair 6 connects view 6 back to view 1
        assert_eq!(pairs[5].target_pose, pairs[0].source_pose);
    }

    #[test]
    fn neighboring_pairs_with_two_thirds_overlap() {
        let pairs = build_neighboring_pairs(&pano(), 4, 2.0 / 3.0, FRAC_PI_2, 16, 16).unwrap();
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            let angle = p.source_pose.rotation().angle_to(p.target_pose.rotation());
            let shared = FRAC_PI_2 - angle;
            assert!((shared - 2.0 * FRAC_PI_2 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn walkin_zero_ratio_is_identity() {
        let window = ViewWindow::from_degrees(20.0, 0.0, 90.0, 90.0, 32, 32).unwrap();
        let depth = DepthMap::constant(32, 32, 3.0).unwrap();
        let pair = build_walkin_pair(&pano(), &depth, &window, 0.0, AxisDepth::CentralPixel).unwrap();
        assert_eq!(pair.target.raster, pair.source.raster);
        assert_eq!(pair.inpaint_area(), 0);
        assert_eq!(pair.target_pose, pair.source_pose);
    }

    #[test]
    fn walkin_border_matches_scale_prediction() {
        let n = 128;
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, n, n).unwrap();
        let depth = DepthMap::constant(n, n, 5.0).unwrap();
        let pair = build_walkin_pair(&pano(), &depth, &window, 0.8, AxisDepth::CentralPixel).unwrap();
        let ratio = 9f64.to_radians().tan() / 45f64.to_radians().tan();
        assert!((ratio - 0.158).abs() < 1e-3);
        let row = n / 2;
        let known = (0..n).filter(|&u| !pair.target_inpaint_mask[row * n + u]).count();
        assert!((known as f64 - ratio * n as f64).abs() <= 1.0);
        let col = n / 2;
        let known_v = (0..n).filter(|&v| !pair.target_inpaint_mask[v * n + col]).count();
        assert!((known_v as f64 - ratio * n as f64).abs() <= 1.0);
        // target moved forward along the view axis by c·D
        let moved = pair.target_pose.translation - pair.source_pose.translation;
        assert!((moved - Vector3::new(4.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn physical_walk_back_matches_crop_border() {
        // a view from distance D·r warped back to distance D leaves the same
        // border band as the crop model
        let n = 128;
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, n, n).unwrap();
        let k = window.intrinsics();
        let d = 5.0;
        let ratio = walk_in_known_ratio(0.8, FRAC_PI_2).unwrap();
        let near = window.pose(Vector3::new(d * (1.0 - ratio), 0.0, 0.0));
        let far = window.pose(Vector3::zeros());
        let depth = DepthMap::constant(n, n, d * ratio).unwrap();
        let r = forward_warp(&textured(n, n), &depth, &near, &far, &k, WarpOptions::default()).unwrap();
        let crop = build_walkin_pair(&pano(), &DepthMap::constant(n, n, d).unwrap(), &window, 0.8, AxisDepth::CentralPixel)
            .unwrap();
        let row = n / 2;
        let band = |m: &[bool]| (0..n).take_while(|&u| m[row * n + u]).count() as f64;
        assert!((band(&r.inpaint_mask) - band(&crop.target_inpaint_mask)).abs() <= 1.0);
        assert!((band(&r.inpaint_mask) - (1.0 - ratio) * n as f64 / 2.0).abs() <= 1.0);
    }

    #[test]
    fn walkin_mask_grows_with_ratio() {
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, 48, 48).unwrap();
        let depth = DepthMap::constant(48, 48, 5.0).unwrap();
        let areas: Vec<usize> = [0.2, 0.4, 0.6, 0.8]
            .iter()
            .map(|&c| build_walkin_pair(&pano(), &depth, &window, c, AxisDepth::CentralPixel).unwrap().inpaint_area())
            .collect();
        assert!(areas.windows(2).all(|w| w[1] > w[0]), "{areas:?}");
    }

    #[test]
    fn walkin_rejects_singular_ratio() {
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, 8, 8).unwrap();
        let depth = DepthMap::constant(8, 8, 5.0).unwrap();
        assert!(matches!(
            build_walkin_pair(&pano(), &depth, &window, 1.0, AxisDepth::CentralPixel),
            Err(KeyframeError::SingularScale(_))
        ));
    }

    #[test]
    fn percentile_depth_mode() {
        let depth = DepthMap::from_samples(9, 9, (0..81).map(|i| 1.0 + i as f64).collect()).unwrap();
        let d = axis_depth(&depth, AxisDepth::CentralPercentile);
        assert!(d <= axis_depth(&depth, AxisDepth::CentralPixel));
    }

    #[test]
    fn window_depth_matches_room() {
        let room = crate::scene::SyntheticRoom::default();
        let pano_depth = room.depth_panorama(2048, &Vector3::zeros()).unwrap();
        let w = ViewWindow::with_aspect(0.4, 0.1, 1.2, 24, 18).unwrap();
        let (pose, k) = (w.pose(Vector3::zeros()), w.intrinsics());
        let a = window_depth(&pano_depth, &pose, &k).unwrap();
        let b = room.view_depth(&pose, &k).unwrap();
        let worst = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs() / y).fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
    }
}
