//! Procedural box room for closed-loop tests and demos.
//!
//! Every wall carries a smooth texture, so panoramas, ray-cast views and
//! depth maps of the same room agree up to interpolation.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::projection::{lon_lat_to_direction, sphere_to_world_dir};
use crate::types::{CameraIntrinsics, CameraPose, CoreError, DepthMap, PanoramaImage, Raster};

/// Axis-aligned room `[-half_x, half_x] × [-half_y, half_y] × [floor, ceiling]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticRoom {
    pub half_x: f64,
    pub half_y: f64,
    pub floor: f64,
    pub ceiling: f64,
}

impl Default for SyntheticRoom {
    fn default() -> Self {
        Self {
            half_x: 4.0,
            half_y: 3.0,
            floor: -1.5,
            ceiling: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Face {
    Front,
    Back,
    Left,
    Right,
    Floor,
    Ceiling,
}

impl SyntheticRoom {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x.abs() < self.half_x && p.y.abs() < self.half_y && p.z > self.floor && p.z < self.ceiling
    }

    fn check_inside(&self, p: &Vector3<f64>) -> Result<(), CoreError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(CoreError::InvalidPose(format!("camera centre {p:?} is outside the room")))
        }
    }

    /// Distance along unit `dir` from an interior `origin` to the wall it hits.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> (f64, Face) {
        let mut best = (f64::INFINITY, Face::Front);
        let mut slab = |o: f64, d: f64, lo: f64, hi: f64, neg: Face, pos: Face| {
            if d > 0.0 {
                let t = (hi - o) / d;
                if t < best.0 {
                    best = (t, pos);
                }
            } else if d < 0.0 {
                let t = (lo - o) / d;
                if t < best.0 {
                    best = (t, neg);
                }
            }
        };
        slab(origin.x, dir.x, -self.half_x, self.half_x, Face::Back, Face::Front);
        slab(origin.y, dir.y, -self.half_y, self.half_y, Face::Right, Face::Left);
        slab(origin.z, dir.z, self.floor, self.ceiling, Face::Floor, Face::Ceiling);
        best
    }

    fn texture(face: Face, p: &Vector3<f64>, out: &mut [f32]) {
        let (a, b, tint) = match face {
            Face::Front => (p.y, p.z, [0.9, 0.6, 0.4]),
            Face::Back => (p.y, p.z, [0.4, 0.7, 0.9]),
            Face::Left => (p.x, p.z, [0.6, 0.9, 0.5]),
            Face::Right => (p.x, p.z, [0.9, 0.5, 0.8]),
            Face::Floor => (p.x, p.y, [0.7, 0.6, 0.5]),
            Face::Ceiling => (p.x, p.y, [0.8, 0.8, 0.8]),
        };
        let pattern = 0.5 + 0.25 * (1.7 * a).sin() * (2.3 * b).cos() + 0.1 * (0.9 * a + 1.3 * b).sin();
        for (c, o) in out.iter_mut().enumerate() {
            *o = (tint[c % 3] * pattern) as f32;
        }
    }

    fn shade(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, out: &mut [f32]) -> f64 {
        let d = dir.normalize();
        let (t, face) = self.hit(origin, &d);
        Self::texture(face, &(origin + d * t), out);
        t
    }

    /// Three-channel equirectangular panorama seen from `center`.
    pub fn render_panorama(&self, width: usize, center: &Vector3<f64>) -> Result<PanoramaImage, CoreError> {
        self.check_inside(center)?;
        PanoramaImage::from_lon_lat(width, 3, |lon, lat, px| {
            self.shade(center, &sphere_to_world_dir(&lon_lat_to_direction(lon, lat)), px);
        })
    }

    /// Euclidean distance panorama seen from `center`.
    pub fn depth_panorama(&self, width: usize, center: &Vector3<f64>) -> Result<DepthMap, CoreError> {
        self.check_inside(center)?;
        let height = width / 2;
        let data = (0..width * height)
            .into_par_iter()
            .map(|i| {
                let (u, v) = (i % width, i / width);
                let (lon, lat) =
                    crate::types::pixel_to_lon_lat(u as f64 + 0.5, v as f64 + 0.5, width, height);
                self.hit(center, &sphere_to_world_dir(&lon_lat_to_direction(lon, lat))).0
            })
            .collect();
        DepthMap::from_samples(width, height, data)
    }

    /// Ray-cast pinhole view.
    pub fn render_view(&self, pose: &CameraPose, k: &CameraIntrinsics) -> Result<Raster, CoreError> {
        self.check_inside(&pose.translation)?;
        let r = pose.matrix();
        let mut out = Raster::zeros(k.width, k.height, 3);
        out.data.par_chunks_mut(k.width * 3).enumerate().for_each(|(v, row)| {
            for u in 0..k.width {
                let ray = r * k.unproject(u as f64 + 0.5, v as f64 + 0.5);
                self.shade(&pose.translation, &ray, &mut row[u * 3..u * 3 + 3]);
            }
        });
        Ok(out)
    }

    /// Z-depth (along the optical axis) of a pinhole view.
    pub fn view_depth(&self, pose: &CameraPose, k: &CameraIntrinsics) -> Result<DepthMap, CoreError> {
        self.check_inside(&pose.translation)?;
        let r = pose.matrix();
        let data = (0..k.width * k.height)
            .into_par_iter()
            .map(|i| {
                let ray = r * k.unproject((i % k.width) as f64 + 0.5, (i / k.width) as f64 + 0.5);
                // the ray has unit z in the camera frame, so its length scale is the z-depth
                self.hit(&pose.translation, &ray.normalize()).0 / ray.norm()
            })
            .collect();
        DepthMap::from_samples(k.width, k.height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{render_from_panorama, window_rotation_matrix};

    #[test]
    fn depth_hits_known_walls() {
        let room = SyntheticRoom::default();
        let d = room.depth_panorama(64, &Vector3::zeros()).unwrap();
        // longitude 0 looks along +x, the front wall is 4 m away
        // samples straddle the horizon, so allow the half-pixel slant
        assert!((d.horizon_depth(0.0) - 4.0).abs() < 1e-2);
        assert!((d.horizon_depth(std::f64::consts::FRAC_PI_2) - 3.0).abs() < 1e-2);
        assert!((d.get(32, 15) - 4.0 / (std::f64::consts::PI / 64.0).cos().powi(2)).abs() < 1e-9);
        assert!(room.depth_panorama(64, &Vector3::new(5.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn panorama_and_ray_cast_agree() {
        let room = SyntheticRoom::default();
        let center = Vector3::new(0.5, -0.3, 0.1);
        let pano = room.render_panorama(1024, &center).unwrap();
        let rot = window_rotation_matrix(0.7, 0.1);
        let k = CameraIntrinsics::from_fov(1.2, 1.0, 48, 40).unwrap();
        let pose = CameraPose::from_matrix(&rot, center).unwrap();
        let a = render_from_panorama(&pano, &rot, &k);
        let b = room.render_view(&pose, &k).unwrap();
        let mean = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.data.len() as f64;
        assert!(mean < 5e-3, "{mean}");
    }

    #[test]
    fn view_depth_is_z_depth() {
        let room = SyntheticRoom::default();
        let pose = CameraPose::from_matrix(&window_rotation_matrix(0.0, 0.0), Vector3::zeros()).unwrap();
        let k = CameraIntrinsics::from_fov(0.6, 0.6, 32, 32).unwrap();
        let d = room.view_depth(&pose, &k).unwrap();
        // looking at the front wall head-on, every pixel is 4 m deep
        assert!(d.data.iter().all(|&z| (z - 4.0).abs() < 1e-9));
    }
}
