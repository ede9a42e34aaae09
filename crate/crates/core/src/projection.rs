//! Equirectangular ↔ perspective mapping.
//!
//! All view geometry is carried out in panorama sphere coordinates: x points
//! at longitude 0 on the horizon, y at longitude +90° (to the right when
//! looking along x) and z up, with `lon = atan2(y, x)` and `lat = asin(z)`.
//! A perspective camera in that frame looks along its own x axis with y to
//! the right of the image and z to the top.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::Quaternion;
use crate::types::{
    lon_lat_to_pixel, pixel_to_lon_lat, CameraIntrinsics, CameraPose, CoreError, PanoramaImage, PerspectiveImage,
    Raster,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("invalid view window: {0}")]
    InvalidWindow(String),
    #[error("invalid split parameters: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Perspective window cut from a panorama. Angles in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewWindow {
    pub yaw: f64,
    pub pitch: f64,
    pub hfov: f64,
    pub vfov: f64,
    pub out_width: usize,
    pub out_height: usize,
}

impl ViewWindow {
    /// Validates the window and wraps `yaw` into `[-π, π)`.
    pub fn new(
        yaw: f64,
        pitch: f64,
        hfov: f64,
        vfov: f64,
        out_width: usize,
        out_height: usize,
    ) -> Result<Self, ProjectionError> {
        if !yaw.is_finite() {
            return Err(ProjectionError::InvalidWindow(format!("yaw {yaw} is not finite")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&pitch) {
            return Err(ProjectionError::InvalidWindow(format!("pitch {pitch} outside [-π/2, π/2]")));
        }
        for (name, fov) in [("hfov", hfov), ("vfov", vfov)] {
            if !(fov > 0.0 && fov < PI) {
                return Err(ProjectionError::InvalidWindow(format!("{name} {fov} outside (0, π)")));
            }
        }
        if out_width == 0 || out_height == 0 {
            return Err(ProjectionError::InvalidWindow("output size must be non-zero".into()));
        }
        Ok(Self {
            yaw: wrap_angle(yaw),
            pitch,
            hfov,
            vfov,
            out_width,
            out_height,
        })
    }

    /// Window whose vertical field of view follows from `hfov` and the
    /// output aspect ratio (square pixels).
    pub fn with_aspect(
        yaw: f64,
        pitch: f64,
        hfov: f64,
        out_width: usize,
        out_height: usize,
    ) -> Result<Self, ProjectionError> {
        let vfov = vfov_from_aspect(hfov, out_width, out_height);
        Self::new(yaw, pitch, hfov, vfov, out_width, out_height)
    }

    pub fn from_degrees(
        yaw: f64,
        pitch: f64,
        hfov: f64,
        vfov: f64,
        out_width: usize,
        out_height: usize,
    ) -> Result<Self, ProjectionError> {
        Self::new(
            yaw.to_radians(),
            pitch.to_radians(),
            hfov.to_radians(),
            vfov.to_radians(),
            out_width,
            out_height,
        )
    }

    /// Lens half-extents `(tan(β/2), tan(γ/2))`.
    pub fn lens_extent(&self) -> (f64, f64) {
        ((self.hfov / 2.0).tan(), (self.vfov / 2.0).tan())
    }

    /// Sphere-frame rotation taking the window's camera axes to the panorama.
    pub fn sphere_rotation(&self) -> Matrix3<f64> {
        sphere_view_rotation(self.yaw, self.pitch)
    }

    /// Pinhole intrinsics matching the window.
    pub fn intrinsics(&self) -> CameraIntrinsics {
        let (wl, hl) = self.lens_extent();
        CameraIntrinsics {
            fx: self.out_width as f64 / (2.0 * wl),
            fy: self.out_height as f64 / (2.0 * hl),
            cx: self.out_width as f64 / 2.0,
            cy: self.out_height as f64 / 2.0,
            width: self.out_width,
            height: self.out_height,
        }
    }

    /// Camera pose of the window at `center` in the world frame.
    pub fn pose(&self, center: Vector3<f64>) -> CameraPose {
        CameraPose::from_matrix(&window_rotation_matrix(self.yaw, self.pitch), center)
            .expect("rotation matrix of a window is always proper")
    }

    /// Sphere-frame ray through output pixel `(u, v)`, scaled to unit depth
    /// along the camera's forward axis.
    pub fn camera_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let (wl, hl) = self.lens_extent();
        let x = u as f64 + 0.5;
        let y = v as f64 + 0.5;
        Vector3::new(
            1.0,
            (2.0 * x / self.out_width as f64 - 1.0) * wl,
            -(2.0 * y / self.out_height as f64 - 1.0) * hl,
        )
    }
}

/// `2·atan(tan(β/2)·H/W)`: vertical field of view of square pixels.
pub fn vfov_from_aspect(hfov: f64, width: usize, height: usize) -> f64 {
    2.0 * ((hfov / 2.0).tan() * height as f64 / width as f64).atan()
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Yaw about the sphere's z axis.
pub fn yaw_matrix(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Pitch about the sphere's y axis, positive tilting x towards +z.
pub fn pitch_matrix(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

/// Pitch in the camera frame, then yaw about the vertical.
pub fn sphere_view_rotation(yaw: f64, pitch: f64) -> Matrix3<f64> {
    yaw_matrix(yaw) * pitch_matrix(pitch)
}

/// Maps pinhole camera axes (x right, y down, z forward) to sphere camera
/// axes (x forward, y right, z up).
fn pinhole_to_sphere_camera() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Sphere coordinates ↔ world coordinates (the y axis flips).
fn world_to_sphere() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0)
}

/// World-from-camera rotation of a window at `(yaw, pitch)`.
pub fn window_rotation_matrix(yaw: f64, pitch: f64) -> Matrix3<f64> {
    world_to_sphere() * sphere_view_rotation(yaw, pitch) * pinhole_to_sphere_camera()
}

pub fn window_rotation(yaw: f64, pitch: f64) -> Quaternion {
    Quaternion::from_rotation_matrix(&window_rotation_matrix(yaw, pitch))
}

/// Unit sphere direction of a world-frame vector.
pub fn world_to_sphere_dir(d: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(d.x, -d.y, d.z)
}

pub fn sphere_to_world_dir(s: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(s.x, -s.y, s.z)
}

/// Longitude/latitude of a (not necessarily unit) sphere-frame direction.
pub fn direction_to_lon_lat(d: &Vector3<f64>) -> (f64, f64) {
    let n = d.norm();
    let lat = (d.z / n).clamp(-1.0, 1.0).asin();
    let lon = d.y.atan2(d.x);
    (lon, lat)
}

pub fn lon_lat_to_direction(lon: f64, lat: f64) -> Vector3<f64> {
    Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

/// Per-pixel visibility of rays in a perspective window.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl VisibilityMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Visibility predicate on a camera-frame ray `x` (sphere camera axes):
/// the ray lies in front of the camera and inside both lens extents.
pub fn in_window(x: &Vector3<f64>, wl: f64, hl: f64) -> bool {
    if x.x <= 0.0 {
        return false;
    }
    (x.y / x.x).abs() < wl && (x.z / x.x).abs() < hl
}

/// Samples a perspective view of `pano` through `window`.
///
/// Every output ray passes through the bilinear panorama lookup with
/// longitude wrap and latitude clamp; the mask records the visibility
/// predicate re-evaluated on each output ray.
pub fn pano_to_perspective(pano: &PanoramaImage, window: &ViewWindow) -> (PerspectiveImage, VisibilityMask) {
    let (w, h, ch) = (window.out_width, window.out_height, pano.channels());
    let rot = window.sphere_rotation();
    let (wl, hl) = window.lens_extent();
    let mut data = vec![0.0f32; w * h * ch];
    let mut mask = vec![false; w * h];
    data.par_chunks_mut(w * ch)
        .zip(mask.par_chunks_mut(w))
        .enumerate()
        .for_each(|(v, (row, mrow))| {
            let mut px = vec![0.0f64; ch];
            for u in 0..w {
                let d = window.camera_ray(u, v);
                let visible = in_window(&d, wl, hl);
                mrow[u] = visible;
                if !visible {
                    continue;
                }
                let dp = rot * d;
                let (lon, lat) = direction_to_lon_lat(&dp);
                let (x, y) = lon_lat_to_pixel(lon, lat, pano.width(), pano.height());
                pano.sample_bilinear(x, y, &mut px);
                for c in 0..ch {
                    row[u * ch + c] = px[c] as f32;
                }
            }
        });
    let raster = Raster {
        width: w,
        height: h,
        channels: ch,
        data,
    };
    let image = PerspectiveImage::with_mask(raster, mask.clone()).expect("mask sized to raster");
    (
        image,
        VisibilityMask {
            width: w,
            height: h,
            data: mask,
        },
    )
}

/// Renders a pinhole camera with world-from-camera rotation `rotation` from
/// the panorama (camera centre at the panorama centre).
pub fn render_from_panorama(pano: &PanoramaImage, rotation: &Matrix3<f64>, k: &CameraIntrinsics) -> Raster {
    let (w, h, ch) = (k.width, k.height, pano.channels());
    let mut data = vec![0.0f32; w * h * ch];
    data.par_chunks_mut(w * ch).enumerate().for_each(|(v, row)| {
        let mut px = vec![0.0f64; ch];
        for u in 0..w {
            let ray = k.unproject(u as f64 + 0.5, v as f64 + 0.5);
            let s = world_to_sphere_dir(&(rotation * ray));
            let (lon, lat) = direction_to_lon_lat(&s);
            let (x, y) = lon_lat_to_pixel(lon, lat, pano.width(), pano.height());
            pano.sample_bilinear(x, y, &mut px);
            for c in 0..ch {
                row[u * ch + c] = px[c] as f32;
            }
        }
    });
    Raster {
        width: w,
        height: h,
        channels: ch,
        data,
    }
}

/// Shape of a panorama canvas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CanvasShape {
    pub width: usize,
    pub channels: usize,
}

impl CanvasShape {
    pub fn height(&self) -> usize {
        self.width / 2
    }
}

/// Gathers a perspective view back onto a panorama canvas.
///
/// Each panorama pixel is rotated into the window's camera frame; inside
/// the window it is projected to `(u_k, v_k)` and bilinearly sampled from
/// the valid perspective pixels. Uncovered canvas pixels stay 0.
pub fn perspective_to_pano(
    persp: &PerspectiveImage,
    window: &ViewWindow,
    canvas: CanvasShape,
) -> Result<(PanoramaImage, Vec<bool>), ProjectionError> {
    if persp.width() != window.out_width || persp.height() != window.out_height {
        return Err(ProjectionError::InvalidWindow(format!(
            "perspective is {}x{}, window expects {}x{}",
            persp.width(),
            persp.height(),
            window.out_width,
            window.out_height
        )));
    }
    if canvas.width < 2 || canvas.width % 2 != 0 {
        return Err(ProjectionError::InvalidWindow(format!(
            "canvas width {} must be even and positive",
            canvas.width
        )));
    }
    if canvas.channels != persp.raster.channels {
        return Err(ProjectionError::InvalidWindow("canvas and perspective channel counts differ".into()));
    }
    let (pw, ph, ch) = (canvas.width, canvas.height(), canvas.channels);
    let rot_t = window.sphere_rotation().transpose();
    let (wl, hl) = window.lens_extent();
    let (vw, vh) = (window.out_width as f64, window.out_height as f64);
    let mut data = vec![0.0f32; pw * ph * ch];
    let mut coverage = vec![false; pw * ph];
    data.par_chunks_mut(pw * ch)
        .zip(coverage.par_chunks_mut(pw))
        .enumerate()
        .for_each(|(r, (row, crow))| {
            let mut px = vec![0.0f64; ch];
            for c in 0..pw {
                let (lon, lat) = pixel_to_lon_lat(c as f64 + 0.5, r as f64 + 0.5, pw, ph);
                let x = rot_t * lon_lat_to_direction(lon, lat);
                if !in_window(&x, wl, hl) {
                    continue;
                }
                let uk = vw * x.y / (2.0 * wl * x.x) + vw / 2.0;
                let vk = -vh * x.z / (2.0 * hl * x.x) + vh / 2.0;
                if sample_valid_bilinear(persp, uk, vk, &mut px) {
                    crow[c] = true;
                    for k in 0..ch {
                        row[c * ch + k] = px[k].clamp(0.0, 1.0) as f32;
                    }
                }
            }
        });
    let raster = Raster {
        width: pw,
        height: ph,
        channels: ch,
        data,
    };
    Ok((PanoramaImage::new(raster)?, coverage))
}

/// Bilinear sample restricted to valid pixels, weights renormalized.
/// Returns `false` when no neighbour is valid.
fn sample_valid_bilinear(img: &PerspectiveImage, x: f64, y: f64, out: &mut [f64]) -> bool {
    let r = &img.raster;
    let fx = (x - 0.5).clamp(0.0, (r.width - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (r.height - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(r.width - 1);
    let y1 = (y0 + 1).min(r.height - 1);
    let ax = fx - x0 as f64;
    let ay = fy - y0 as f64;
    let taps = [
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x1, y0, ax * (1.0 - ay)),
        (x0, y1, (1.0 - ax) * ay),
        (x1, y1, ax * ay),
    ];
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut wsum = 0.0;
    let mut any = false;
    for (u, v, wgt) in taps {
        if img.is_valid(u, v) {
            any = true;
            wsum += wgt;
            for (c, o) in out.iter_mut().enumerate() {
                *o += wgt * r.get(u, v, c) as f64;
            }
        }
    }
    if !any {
        return false;
    }
    if wsum > 0.0 {
        out.iter_mut().for_each(|o| *o /= wsum);
    } else {
        // valid taps carry zero weight: fall back to the first valid one
        let (u, v, _) = taps.iter().find(|(u, v, _)| img.is_valid(*u, *v)).copied().unwrap();
        for (c, o) in out.iter_mut().enumerate() {
            *o = r.get(u, v, c) as f64;
        }
    }
    true
}

/// Result of cutting a panorama into horizontal views.
#[derive(Clone, Debug)]
pub struct PanoramaSplit {
    pub views: Vec<(PerspectiveImage, ViewWindow)>,
    /// Yaw step between consecutive centres (radians).
    pub yaw_step: f64,
    /// True when the views wrap around the full 360°.
    pub full_coverage: bool,
}

/// Yaw centres for `n_views` windows of width `hfov` sharing
/// `overlap_fraction · hfov` with their neighbours.
pub fn split_yaws(n_views: usize, overlap_fraction: f64, hfov: f64) -> Result<(Vec<f64>, f64, bool), ProjectionError> {
    if !(3..=12).contains(&n_views) {
        return Err(ProjectionError::InvalidSplit(format!("n_views {n_views} outside [3, 12]")));
    }
    if !(0.0..=2.0 / 3.0 + 1e-12).contains(&overlap_fraction) {
        return Err(ProjectionError::InvalidSplit(format!(
            "overlap fraction {overlap_fraction} outside [0, 2/3]"
        )));
    }
    if !(hfov > 0.0 && hfov < PI) {
        return Err(ProjectionError::InvalidSplit(format!("fov {hfov} outside (0, π)")));
    }
    let mut step = hfov * (1.0 - overlap_fraction);
    let full = n_views as f64 * step >= TAU - 1e-9;
    if full {
        step = TAU / n_views as f64;
    }
    let yaws = (0..n_views).map(|k| k as f64 * step).collect();
    Ok((yaws, step, full))
}

/// Splits the panorama horizontally into overlapping perspective views
/// centred on the horizon.
pub fn split_panorama(
    pano: &PanoramaImage,
    n_views: usize,
    overlap_fraction: f64,
    hfov: f64,
    out_width: usize,
    out_height: usize,
) -> Result<PanoramaSplit, ProjectionError> {
    let (yaws, step, full) = split_yaws(n_views, overlap_fraction, hfov)?;
    let views = yaws
        .into_iter()
        .map(|yaw| {
            let window = ViewWindow::with_aspect(yaw, 0.0, hfov, out_width, out_height)?;
            let (img, _) = pano_to_perspective(pano, &window);
            Ok((img, window))
        })
        .collect::<Result<Vec<_>, ProjectionError>>()?;
    Ok(PanoramaSplit {
        views,
        yaw_step: step,
        full_coverage: full,
    })
}

/// The six cube-face windows (front, right, back, left, top, bottom).
pub fn cube_face_windows(fov: f64, size: usize) -> Result<Vec<ViewWindow>, ProjectionError> {
    [(0.0, 0.0), (90.0, 0.0), (180.0, 0.0), (270.0, 0.0), (0.0, 90.0), (0.0, -90.0)]
        .iter()
        .map(|&(yaw, pitch): &(f64, f64)| ViewWindow::new(yaw.to_radians(), pitch.to_radians(), fov, fov, size, size))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lon_pano(width: usize) -> PanoramaImage {
        PanoramaImage::from_lon_lat(width, 3, |lon, lat, px| {
            px[0] = (lon / TAU + 0.5) as f32;
            px[1] = (lat / PI + 0.5) as f32;
            px[2] = 0.0;
        })
        .unwrap()
    }

    #[test]
    fn window_yaw_wraps() {
        let w = ViewWindow::new(3.0 * PI / 2.0, 0.0, 1.0, 1.0, 4, 4).unwrap();
        assert!((w.yaw + PI / 2.0).abs() < 1e-12);
        assert!(ViewWindow::new(0.0, 2.0, 1.0, 1.0, 4, 4).is_err());
        assert!(ViewWindow::new(0.0, 0.0, PI, 1.0, 4, 4).is_err());
    }

    #[test]
    fn front_window_sees_red_center_column() {
        let pano = PanoramaImage::from_lon_lat(256, 3, |lon, _, px| {
            if lon.abs() < 0.05 {
                px.copy_from_slice(&[1.0, 0.0, 0.0]);
            } else {
                px.copy_from_slice(&[0.0, 0.0, 1.0]);
            }
        })
        .unwrap();
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, 33, 33).unwrap();
        let (img, mask) = pano_to_perspective(&pano, &window);
        assert_eq!(img.raster.pixel(16, 16), &[1.0, 0.0, 0.0]);
        assert_eq!(mask.count(), 33 * 33);
    }

    #[test]
    fn top_view_samples_top_rows() {
        let pano = PanoramaImage::from_lon_lat(128, 1, |_, lat, px| {
            px[0] = if lat > 0.0 { 1.0 } else { 0.0 };
        })
        .unwrap();
        let window = ViewWindow::from_degrees(0.0, 90.0, 90.0, 90.0, 32, 32).unwrap();
        let (img, _) = pano_to_perspective(&pano, &window);
        assert!(img.raster.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn analytic_panorama_matches_closed_form() {
        let pano = lon_pano(512);
        let window = ViewWindow::from_degrees(30.0, 20.0, 70.0, 50.0, 64, 48).unwrap();
        let (img, _) = pano_to_perspective(&pano, &window);
        let rot = window.sphere_rotation();
        let tol = 2.0 / 48.0;
        for v in 0..48 {
            for u in 0..64 {
                let d = rot * window.camera_ray(u, v);
                let (lon, lat) = direction_to_lon_lat(&d);
                let expect = [lon / TAU + 0.5, lat / PI + 0.5];
                let got = img.raster.pixel(u, v);
                assert!((got[0] as f64 - expect[0]).abs() < tol);
                assert!((got[1] as f64 - expect[1]).abs() < tol);
            }
        }
    }

    #[test]
    fn pinhole_route_matches_sphere_route() {
        let pano = PanoramaImage::from_lon_lat(256, 1, |lon, lat, px| {
            px[0] = (0.5 + 0.3 * (2.0 * lon).sin() * lat.cos()) as f32;
        })
        .unwrap();
        let window = ViewWindow::from_degrees(-60.0, 25.0, 80.0, 60.0, 40, 30).unwrap();
        let (a, _) = pano_to_perspective(&pano, &window);
        let b = render_from_panorama(&pano, &window.pose(Vector3::zeros()).matrix(), &window.intrinsics());
        for (x, y) in a.raster.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn window_forward_axis_matches_yaw_pitch_vector() {
        for &(yaw, pitch) in &[(0.3, 0.2), (-2.0, -0.7), (1.0, 1.2)] {
            let fwd = sphere_view_rotation(yaw, pitch) * Vector3::x();
            let expect = Vector3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin());
            assert!((fwd - expect).norm() < 1e-12);
            let r = window_rotation_matrix(yaw, pitch);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let cam_fwd = sphere_to_world_dir(&expect);
            assert!((r * Vector3::z() - cam_fwd).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_perspective_gives_empty_coverage() {
        let window = ViewWindow::from_degrees(0.0, 0.0, 90.0, 90.0, 16, 16).unwrap();
        let persp = PerspectiveImage::with_mask(Raster::zeros(16, 16, 1), vec![false; 256]).unwrap();
        let (_, cov) = perspective_to_pano(&persp, &window, CanvasShape { width: 64, channels: 1 }).unwrap();
        assert!(cov.iter().all(|&c| !c));
    }

    #[test]
    fn split_four_views_no_overlap() {
        let (yaws, step, full) = split_yaws(4, 0.0, PI / 2.0).unwrap();
        assert!(full);
        assert!((step - PI / 2.0).abs() < 1e-15);
        let deg: Vec<f64> = yaws.iter().map(|y| y.to_degrees()).collect();
        for (d, e) in deg.iter().zip([0.0, 90.0, 180.0, 270.0]) {
            assert!((d - e).abs() < 1e-9);
        }
    }

    #[test]
    fn split_six_views_third_overlap_shares_thirty_degrees() {
        let (yaws, step, full) = split_yaws(6, 1.0 / 3.0, PI / 2.0).unwrap();
        assert!(full);
        assert!((step.to_degrees() - 60.0).abs() < 1e-9);
        let shared = 90.0 - (yaws[1] - yaws[0]).to_degrees();
        assert!((shared - 30.0).abs() < 1e-9);
    }

    #[test]
    fn split_eight_views_is_forty_five_degrees() {
        let (yaws, _, full) = split_yaws(8, 0.5, PI / 2.0).unwrap();
        assert!(full);
        for k in 1..8 {
            assert!(((yaws[k] - yaws[k - 1]).to_degrees() - 45.0).abs() < 1e-9);
        }
    }

    #[test]
    fn split_rejects_out_of_range() {
        assert!(split_yaws(2, 0.0, 1.0).is_err());
        assert!(split_yaws(13, 0.0, 1.0).is_err());
        assert!(split_yaws(4, 0.7, 1.0).is_err());
    }

    #[test]
    fn split_produces_images() {
        let pano = lon_pano(128);
        let split = split_panorama(&pano, 4, 0.0, PI / 2.0, 16, 16).unwrap();
        assert_eq!(split.views.len(), 4);
        assert!(split.full_coverage);
    }
}
