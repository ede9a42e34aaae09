//! Shared domain types: rasters, panoramas, cameras and depth.
//!
//! Conventions used across the crate:
//!
//! * pixel `(u, v)` samples the continuous coordinate `(u + 0.5, v + 0.5)`;
//! * poses are world-from-camera (`X_world = R · X_cam + t`), so the pose
//!   translation is the camera centre;
//! * camera frames follow the pinhole convention (x right, y down, z forward);
//! * the world frame is right-handed with X forward, Y left and Z up.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::Quaternion;

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("raster data length {actual} does not match {width}x{height}x{channels}")]
    RasterSize {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("invalid panorama: {0}")]
    InvalidPanorama(ValidationReport),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Row-major interleaved raster with `f32` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, CoreError> {
        if data.len() != width * height * channels {
            return Err(CoreError::RasterSize {
                width,
                height,
                channels,
                actual: data.len(),
            });
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

    /// Builds a raster from a per-pixel function returning `channels` values.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, &mut [f32]),
    ) -> Self {
        let mut r = Self::zeros(width, height, channels);
        for v in 0..height {
            for u in 0..width {
                let i = (v * width + u) * channels;
                f(u, v, &mut r.data[i..i + channels]);
            }
        }
        r
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        (v * self.width + u) * self.channels
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> f32 {
        self.data[self.index(u, v) + c]
    }

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let i = self.index(u, v);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, u: usize, v: usize) -> &mut [f32] {
        let i = self.index(u, v);
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn flip_vertical(&self) -> Raster {
        let mut out = self.clone();
        let row = self.width * self.channels;
        for v in 0..self.height {
            let src = (self.height - 1 - v) * row;
            out.data[v * row..(v + 1) * row].copy_from_slice(&self.data[src..src + row]);
        }
        out
    }

    pub fn flip_horizontal(&self) -> Raster {
        Raster::from_fn(self.width, self.height, self.channels, |u, v, px| {
            px.copy_from_slice(self.pixel(self.width - 1 - u, v))
        })
    }

    /// Bilinear sample at continuous coordinates (pixel centres at `+0.5`),
    /// clamping at all borders.
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64, out: &mut [f64]) {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = fx - x0 as f64;
        let ay = fy - y0 as f64;
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let p00 = self.get(x0, y0, c) as f64;
            let p10 = self.get(x1, y0, c) as f64;
            let p01 = self.get(x0, y1, c) as f64;
            let p11 = self.get(x1, y1, c) as f64;
            *o = (p00 * (1.0 - ax) + p10 * ax) * (1.0 - ay) + (p01 * (1.0 - ax) + p11 * ax) * ay;
        }
    }

    /// Area-average downsample by an integer factor.
    pub fn downsample(&self, factor: usize) -> Raster {
        let factor = factor.max(1);
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        Raster::from_fn(w, h, self.channels, |u, v, px| {
            let mut acc = vec![0.0f64; self.channels];
            let mut n = 0.0;
            for dv in 0..factor {
                for du in 0..factor {
                    let (su, sv) = (u * factor + du, v * factor + dv);
                    if su < self.width && sv < self.height {
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += self.get(su, sv, c) as f64;
                        }
                        n += 1.0;
                    }
                }
            }
            for (p, a) in px.iter_mut().zip(acc) {
                *p = (a / n) as f32;
            }
        })
    }
}

/// One violated panorama invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Aspect { width: usize, height: usize },
    Empty,
    DataLength { expected: usize, actual: usize },
    NonFinite { count: usize, first_index: usize },
    OutOfRange { count: usize, first_index: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{v:?}")).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every panorama invariant that `raster` breaks.
pub fn validate_panorama(raster: &Raster) -> ValidationReport {
    let mut violations = Vec::new();
    if raster.width == 0 || raster.height == 0 || raster.channels == 0 {
        violations.push(Violation::Empty);
    }
    if raster.width != 2 * raster.height {
        violations.push(Violation::Aspect {
            width: raster.width,
            height: raster.height,
        });
    }
    let expected = raster.width * raster.height * raster.channels;
    if raster.data.len() != expected {
        violations.push(Violation::DataLength {
            expected,
            actual: raster.data.len(),
        });
    }
    let mut non_finite = (0usize, usize::MAX);
    let mut out_of_range = (0usize, usize::MAX);
    for (i, &s) in raster.data.iter().enumerate() {
        if !s.is_finite() {
            non_finite.0 += 1;
            non_finite.1 = non_finite.1.min(i);
        } else if !(0.0..=1.0).contains(&s) {
            out_of_range.0 += 1;
            out_of_range.1 = out_of_range.1.min(i);
        }
    }
    if non_finite.0 > 0 {
        violations.push(Violation::NonFinite {
            count: non_finite.0,
            first_index: non_finite.1,
        });
    }
    if out_of_range.0 > 0 {
        violations.push(Violation::OutOfRange {
            count: out_of_range.0,
            first_index: out_of_range.1,
        });
    }
    ValidationReport { violations }
}

/// Equirectangular panorama (`width == 2 * height`) with longitude wrap.
#[derive(Clone, Debug, PartialEq)]
pub struct PanoramaImage {
    raster: Raster,
}

impl PanoramaImage {
    pub fn new(raster: Raster) -> Result<Self, CoreError> {
        let report = validate_panorama(&raster);
        if !report.is_valid() {
            return Err(CoreError::InvalidPanorama(report));
        }
        Ok(Self { raster })
    }

    /// Builds a panorama from a function of `(longitude, latitude)` evaluated
    /// at every pixel centre.
    pub fn from_lon_lat(
        width: usize,
        channels: usize,
        mut f: impl FnMut(f64, f64, &mut [f32]),
    ) -> Result<Self, CoreError> {
        let height = width / 2;
        let raster = Raster::from_fn(width, height, channels, |u, v, px| {
            let (lon, lat) = pixel_to_lon_lat(u as f64 + 0.5, v as f64 + 0.5, width, height);
            f(lon, lat, px)
        });
        Self::new(raster)
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn channels(&self) -> usize {
        self.raster.channels
    }

    /// Sample with the column taken modulo the width and the row clamped.
    pub fn sample(&self, col: i64, row: i64, channel: usize) -> f32 {
        let w = self.width() as i64;
        let u = col.rem_euclid(w) as usize;
        let v = row.clamp(0, self.height() as i64 - 1) as usize;
        self.raster.get(u, v, channel)
    }

    /// Bilinear sample at continuous coordinates with longitude wrap and
    /// latitude clamp.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let w = self.width();
        let h = self.height();
        let fx = x - 0.5;
        let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
        let x0f = fx.floor();
        let ax = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ay = fy - y0 as f64;
        let r = &self.raster;
        for (c, o) in out.iter_mut().enumerate().take(r.channels) {
            let p00 = r.get(x0, y0, c) as f64;
            let p10 = r.get(x1, y0, c) as f64;
            let p01 = r.get(x0, y1, c) as f64;
            let p11 = r.get(x1, y1, c) as f64;
            *o = (p00 * (1.0 - ax) + p10 * ax) * (1.0 - ay) + (p01 * (1.0 - ax) + p11 * ax) * ay;
        }
    }
}

/// Longitude/latitude (radians) of a continuous panorama coordinate.
pub fn pixel_to_lon_lat(x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
    let lon = (x / width as f64 - 0.5) * std::f64::consts::TAU;
    let lat = -(y / height as f64 - 0.5) * std::f64::consts::PI;
    (lon, lat)
}

/// Continuous panorama coordinate of a longitude/latitude pair.
pub fn lon_lat_to_pixel(lon: f64, lat: f64, width: usize, height: usize) -> (f64, f64) {
    let x = (lon / std::f64::consts::TAU + 0.5) * width as f64;
    let y = (-lat / std::f64::consts::PI + 0.5) * height as f64;
    (x, y)
}

/// Perspective raster with an optional per-pixel validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PerspectiveImage {
    pub raster: Raster,
    pub valid: Option<Vec<bool>>,
}

impl PerspectiveImage {
    pub fn new(raster: Raster) -> Self {
        Self { raster, valid: None }
    }

    pub fn with_mask(raster: Raster, valid: Vec<bool>) -> Result<Self, CoreError> {
        if valid.len() != raster.width * raster.height {
            return Err(CoreError::DimensionMismatch(format!(
                "mask has {} entries for a {}x{} raster",
                valid.len(),
                raster.width,
                raster.height
            )));
        }
        Ok(Self {
            raster,
            valid: Some(valid),
        })
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.valid
            .as_ref()
            .map_or(true, |m| m[v * self.raster.width + u])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "w")]
    pub width: usize,
    #[serde(rename = "h")]
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, CoreError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(CoreError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(CoreError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Centred pinhole with horizontal field of view `hfov` and vertical
    /// field of view `vfov` (radians).
    pub fn from_fov(hfov: f64, vfov: f64, width: usize, height: usize) -> Result<Self, CoreError> {
        let fx = width as f64 / (2.0 * (hfov / 2.0).tan());
        let fy = height as f64 / (2.0 * (vfov / 2.0).tan());
        Self::new(fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Camera-frame ray (z = 1) through continuous pixel `(x, y)`.
    pub fn unproject(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }

    /// Continuous pixel of a camera-frame point; `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }
}

/// World-from-camera rigid pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    /// Normalizes and canonicalizes `rotation`.
    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Result<Self, CoreError> {
        if !rotation.is_finite() || rotation.norm() == 0.0 {
            return Err(CoreError::InvalidPose("rotation quaternion is zero or non-finite".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidPose("translation is non-finite".into()));
        }
        Ok(Self {
            rotation: rotation.normalized().canonical(),
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Quaternion::IDENTITY,
            translation: Vector3::zeros(),
        }
    }

    /// From the camera-from-world extrinsics `(R, T)` (`X_cam = R X_world + T`).
    pub fn from_camera_from_world(rotation: Quaternion, t: Vector3<f64>) -> Result<Self, CoreError> {
        let q = rotation.normalized();
        let r = q.to_matrix();
        Self::new(q.conjugate(), -(r.transpose() * t))
    }

    pub fn from_matrix(r: &Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CoreError> {
        Self::new(Quaternion::from_rotation_matrix(r), translation)
    }

    pub fn rotation(&self) -> Quaternion {
        self.rotation
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.rotation.to_matrix()
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.matrix() * p + self.translation
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.matrix().transpose() * (p - self.translation)
    }

    /// Rigid transform mapping points in this camera's frame to `other`'s
    /// frame, returned as `(R, t)` with `X_other = R X_self + t`.
    pub fn relative_to(&self, other: &CameraPose) -> (Matrix3<f64>, Vector3<f64>) {
        let ro = other.matrix().transpose();
        (ro * self.matrix(), ro * (self.translation - other.translation))
    }

    /// The transform from [`relative_to`](Self::relative_to) packed as a pose.
    pub fn relative_pose(&self, other: &CameraPose) -> CameraPose {
        let (r, t) = self.relative_to(other);
        CameraPose {
            rotation: Quaternion::from_rotation_matrix(&r),
            translation: t,
        }
    }

    pub fn inverse(&self) -> CameraPose {
        let r = self.matrix().transpose();
        CameraPose {
            rotation: self.rotation.conjugate().canonical(),
            translation: -(r * self.translation),
        }
    }
}

/// Rotation matrix plus a flag raised when the input had to be renormalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix {
    pub matrix: Matrix3<f64>,
    pub renormalized: bool,
}

/// Rotation matrix of `q`, renormalizing (and flagging) off-unit input.
pub fn rotation_matrix(q: Quaternion) -> RotationMatrix {
    if q.is_unit() {
        RotationMatrix {
            matrix: q.to_matrix(),
            renormalized: false,
        }
    } else {
        log::warn!("quaternion norm {} is not unit; renormalizing", q.norm());
        RotationMatrix {
            matrix: q.normalized().to_matrix(),
            renormalized: true,
        }
    }
}

/// Metric depth per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub max_depth: f64,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>, max_depth: f64) -> Result<Self, CoreError> {
        if data.len() != width * height {
            return Err(CoreError::InvalidDepth(format!(
                "{} samples for {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if !(max_depth.is_finite() && max_depth > 0.0) {
            return Err(CoreError::InvalidDepth(format!("max depth {max_depth} must be positive")));
        }
        if let Some((i, d)) = data
            .iter()
            .enumerate()
            .find(|(_, &d)| !(d.is_finite() && d > 0.0 && d <= max_depth))
        {
            return Err(CoreError::InvalidDepth(format!(
                "sample {i} = {d} outside (0, {max_depth}]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            max_depth,
        })
    }

    /// Builds a depth map whose `max_depth` is the largest sample.
    pub fn from_samples(width: usize, height: usize, data: Vec<f64>) -> Result<Self, CoreError> {
        let max = data.iter().cloned().fold(0.0f64, f64::max);
        Self::new(width, height, data, max)
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self, CoreError> {
        Self::new(width, height, vec![depth; width * height], depth)
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    /// Bilinear sample over an equirectangular depth panorama (column wrap).
    pub fn sample_equirect(&self, x: f64, y: f64) -> f64 {
        let w = self.width;
        let h = self.height;
        let fx = x - 0.5;
        let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
        let x0f = fx.floor();
        let ax = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ay = fy - y0 as f64;
        (self.get(x0, y0) * (1.0 - ax) + self.get(x1, y0) * ax) * (1.0 - ay)
            + (self.get(x0, y1) * (1.0 - ax) + self.get(x1, y1) * ax) * ay
    }

    /// Depth in direction of longitude `lon` on the horizon of an
    /// equirectangular depth panorama.
    pub fn horizon_depth(&self, lon: f64) -> f64 {
        let (x, y) = lon_lat_to_pixel(lon, 0.0, self.width, self.height);
        self.sample_equirect(x, y)
    }
}
