//! Plücker ray embeddings of camera poses.
//!
//! Each pixel ray is stored as `(m, d)` with `d` the world-frame direction
//! through the pixel centre and `m = c × d` its moment about the origin,
//! `c` being the camera centre.

use std::io::{Read, Write};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CameraIntrinsics, CameraPose, CoreError};

pub const PLKR_MAGIC: &[u8; 4] = b"PLKR";
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RaymapError {
    #[error("raymap volume needs at least one pose")]
    EmptyPoses,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed raymap file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Raymap {
    pub width: usize,
    pub height: usize,
    /// Six values per pixel, `[mx, my, mz, dx, dy, dz]`, row-major.
    pub data: Vec<f64>,
    /// Set once every `(m, d)` has been divided by `|d|`.
    pub normalized: bool,
}

impl Raymap {
    pub fn ray(&self, u: usize, v: usize) -> (Vector3<f64>, Vector3<f64>) {
        let i = (v * self.width + u) * 6;
        let s = &self.data[i..i + 6];
        (Vector3::new(s[0], s[1], s[2]), Vector3::new(s[3], s[4], s[5]))
    }

    /// Largest `|m · d|` over all pixels.
    pub fn max_constraint_violation(&self) -> f64 {
        self.data
            .chunks_exact(6)
            .map(|r| (r[0] * r[3] + r[1] * r[4] + r[2] * r[5]).abs())
            .fold(0.0, f64::max)
    }

    /// Divides each pixel's `(m, d)` by `|d|`.
    pub fn normalized(&self) -> Raymap {
        let mut out = self.clone();
        for r in out.data.chunks_exact_mut(6) {
            let n = (r[3] * r[3] + r[4] * r[4] + r[5] * r[5]).sqrt();
            if n > 0.0 {
                r.iter_mut().for_each(|x| *x /= n);
            }
        }
        out.normalized = true;
        out
    }

    /// Alternate four-channel encoding `[0, dx, dy, dz]` per pixel.
    pub fn quaternion_embedding(&self) -> Vec<f64> {
        self.data
            .chunks_exact(6)
            .flat_map(|r| [0.0, r[3], r[4], r[5]])
            .collect()
    }
}

/// Intrinsics rescaled to an output grid of `out_size` pixels.
pub fn scale_intrinsics(k: &CameraIntrinsics, out_size: (usize, usize)) -> CameraIntrinsics {
    let sx = out_size.0 as f64 / k.width as f64;
    let sy = out_size.1 as f64 / k.height as f64;
    CameraIntrinsics {
        fx: k.fx * sx,
        fy: k.fy * sy,
        cx: k.cx * sx,
        cy: k.cy * sy,
        width: out_size.0,
        height: out_size.1,
    }
}

/// Raw (unnormalized) raymap of `pose` sampled on an `out_size` grid.
pub fn pose_to_raymap(
    pose: &CameraPose,
    k: &CameraIntrinsics,
    out_size: (usize, usize),
) -> Result<Raymap, RaymapError> {
    k.validate()?;
    let (w, h) = out_size;
    if w == 0 || h == 0 {
        return Err(RaymapError::Shape("output size must be non-zero".into()));
    }
    let ks = scale_intrinsics(k, out_size);
    let kinv = ks.inverse();
    let rot = pose.matrix();
    let c = pose.center();
    let mut data = vec![0.0; w * h * 6];
    data.par_chunks_mut(w * 6).enumerate().for_each(|(v, row)| {
        for u in 0..w {
            let d = rot * (kinv * Vector3::new(u as f64 + 0.5, v as f64 + 0.5, 1.0));
            let m = c.cross(&d);
            row[u * 6..u * 6 + 6].copy_from_slice(&[m.x, m.y, m.z, d.x, d.y, d.z]);
        }
    });
    Ok(Raymap {
        width: w,
        height: h,
        data,
        normalized: false,
    })
}

/// True iff every pixel of `b` is a positive multiple of the same pixel of
/// `a`, within [`EQUIVALENCE_TOLERANCE`] relative to the ray magnitude.
pub fn raymap_equivalence_check(a: &Raymap, b: &Raymap) -> bool {
    if a.width != b.width || a.height != b.height {
        return false;
    }
    a.data.chunks_exact(6).zip(b.data.chunks_exact(6)).all(|(ra, rb)| {
        let aa: f64 = ra.iter().map(|x| x * x).sum();
        let bb: f64 = rb.iter().map(|x| x * x).sum();
        if aa == 0.0 || bb == 0.0 {
            return aa == bb;
        }
        let s = ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>() / aa;
        if s <= 0.0 {
            return false;
        }
        let resid: f64 = ra.iter().zip(rb).map(|(x, y)| (y - s * x).powi(2)).sum::<f64>().sqrt();
        resid <= EQUIVALENCE_TOLERANCE * bb.sqrt()
    })
}

/// Raymaps of a trajectory, concatenated channel-wise (6 channels per frame).
#[derive(Clone, Debug, PartialEq)]
pub struct RaymapVolume {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Raymap>,
}

impl RaymapVolume {
    pub fn new(frames: Vec<Raymap>) -> Result<Self, RaymapError> {
        let first = frames.first().ok_or(RaymapError::EmptyPoses)?;
        let (width, height) = (first.width, first.height);
        if let Some(bad) = frames.iter().find(|f| f.width != width || f.height != height) {
            return Err(RaymapError::Shape(format!(
                "frame {}x{} in a {}x{} volume",
                bad.width, bad.height, width, height
            )));
        }
        Ok(Self { width, height, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn channels(&self) -> usize {
        6 * self.frames.len()
    }

    /// All `6N` channels at one pixel, frame by frame.
    pub fn pixel(&self, u: usize, v: usize) -> Vec<f64> {
        let i = (v * self.width + u) * 6;
        self.frames.iter().flat_map(|f| f.data[i..i + 6].iter().copied()).collect()
    }

    /// Channel block `k` (channels `6k..6k+6`) as a standalone raymap.
    pub fn frame(&self, k: usize) -> &Raymap {
        &self.frames[k]
    }
}

pub fn stack_raymaps(
    poses: &[CameraPose],
    k: &CameraIntrinsics,
    out_size: (usize, usize),
) -> Result<RaymapVolume, RaymapError> {
    if poses.is_empty() {
        return Err(RaymapError::EmptyPoses);
    }
    let frames = poses
        .par_iter()
        .map(|p| pose_to_raymap(p, k, out_size))
        .collect::<Result<Vec<_>, _>>()?;
    RaymapVolume::new(frames)
}

/// JSON sidecar written next to a `.plkr` volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaymapSidecar {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub channels_per_frame: usize,
    pub normalized: bool,
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<crate::io::PoseRecord>,
}

/// Writes the binary volume: magic, `u32` width/height/frames, then
/// little-endian `f32` values frame by frame with channels innermost.
pub fn write_plkr<W: Write>(vol: &RaymapVolume, mut out: W) -> Result<(), RaymapError> {
    out.write_all(PLKR_MAGIC)?;
    for n in [vol.width, vol.height, vol.len()] {
        let n = u32::try_from(n).map_err(|_| RaymapError::Format(format!("dimension {n} exceeds u32")))?;
        out.write_all(&n.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(vol.width * vol.height * 6 * 4);
    for f in &vol.frames {
        buf.clear();
        for x in &f.data {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_plkr<R: Read>(mut input: R) -> Result<RaymapVolume, RaymapError> {
    let mut head = [0u8; 16];
    input.read_exact(&mut head)?;
    if &head[..4] != PLKR_MAGIC {
        return Err(RaymapError::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, n) = (word(4), word(8), word(12));
    if n == 0 {
        return Err(RaymapError::EmptyPoses);
    }
    let mut frames = Vec::with_capacity(n);
    let mut bytes = vec![0u8; w * h * 6 * 4];
    for _ in 0..n {
        input.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        frames.push(Raymap {
            width: w,
            height: h,
            data,
            normalized: false,
        });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(RaymapError::Format("trailing bytes after volume".into()));
    }
    RaymapVolume::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Quaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(40.0, 40.0, 16.0, 16.0, 32, 32).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> CameraPose {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        CameraPose::new(q, t).unwrap()
    }

    #[test]
    fn optical_axis_at_origin() {
        let k = CameraIntrinsics::new(10.0, 10.0, 0.5, 0.5, 1, 1).unwrap();
        let r = pose_to_raymap(&CameraPose::identity(), &k, (1, 1)).unwrap();
        let (m, d) = r.ray(0, 0);
        assert_eq!(d, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(m, Vector3::zeros());
    }

    #[test]
    fn moment_of_shifted_camera() {
        // camera-from-world translation (1,0,0) puts the centre at (-1,0,0)
        let k = CameraIntrinsics::new(10.0, 10.0, 0.5, 0.5, 1, 1).unwrap();
        let pose = CameraPose::from_camera_from_world(Quaternion::IDENTITY, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let (m, d) = pose_to_raymap(&pose, &k, (1, 1)).unwrap().ray(0, 0);
        assert_eq!(d, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(m, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn plucker_constraint_on_random_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let r = pose_to_raymap(&random_pose(&mut rng), &k(), (32, 32)).unwrap();
            assert!(r.max_constraint_violation() < 1e-9);
        }
    }

    #[test]
    fn scaled_raymap_is_equivalent() {
        let r = pose_to_raymap(&random_pose(&mut ChaCha8Rng::seed_from_u64(1)), &k(), (8, 8)).unwrap();
        let mut s = r.clone();
        s.data.iter_mut().for_each(|x| *x *= 3.0);
        assert!(raymap_equivalence_check(&r, &s));
        assert!(raymap_equivalence_check(&r, &r.normalized()));
    }

    #[test]
    fn different_translation_is_not_equivalent() {
        let q = Quaternion::from_axis_angle(Vector3::y(), 0.3);
        let a = pose_to_raymap(&CameraPose::new(q, Vector3::new(0.0, 0.0, 0.0)).unwrap(), &k(), (8, 8)).unwrap();
        let b = pose_to_raymap(&CameraPose::new(q, Vector3::new(0.5, 0.0, 0.0)).unwrap(), &k(), (8, 8)).unwrap();
        assert!(!raymap_equivalence_check(&a, &b));
    }

    #[test]
    fn negated_direction_is_not_equivalent() {
        let a = pose_to_raymap(&random_pose(&mut ChaCha8Rng::seed_from_u64(2)), &k(), (4, 4)).unwrap();
        let mut b = a.clone();
        for x in &mut b.data[3..6] {
            *x = -*x;
        }
        assert!(!raymap_equivalence_check(&a, &b));
    }

    #[test]
    fn translation_along_ray_keeps_line() {
        let pose = random_pose(&mut ChaCha8Rng::seed_from_u64(4));
        let k1 = CameraIntrinsics::new(10.0, 10.0, 0.5, 0.5, 1, 1).unwrap();
        let a = pose_to_raymap(&pose, &k1, (1, 1)).unwrap();
        let (_, d) = a.ray(0, 0);
        let moved = CameraPose::new(pose.rotation(), pose.translation + d * 2.5).unwrap();
        let b = pose_to_raymap(&moved, &k1, (1, 1)).unwrap();
        assert!(raymap_equivalence_check(&a, &b));
    }

    #[test]
    fn principal_point_shift_with_reindex() {
        // shifting cx by one pixel and reading one column over gives the same ray
        let pose = random_pose(&mut ChaCha8Rng::seed_from_u64(5));
        let a = pose_to_raymap(&pose, &k(), (32, 32)).unwrap();
        let k2 = CameraIntrinsics::new(40.0, 40.0, 17.0, 16.0, 32, 32).unwrap();
        let b = pose_to_raymap(&pose, &k2, (32, 32)).unwrap();
        for v in 0..32 {
            for u in 0..31 {
                let (ma, da) = a.ray(u, v);
                let (mb, db) = b.ray(u + 1, v);
                assert!((ma - mb).norm() < 1e-12 && (da - db).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stack_slices_match_single_raymaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let poses: Vec<_> = (0..48).map(|_| random_pose(&mut rng)).collect();
        let vol = stack_raymaps(&poses, &k(), (32, 32)).unwrap();
        assert_eq!((vol.width, vol.height, vol.channels()), (32, 32, 288));
        for (i, p) in poses.iter().enumerate() {
            assert_eq!(vol.frame(i), &pose_to_raymap(p, &k(), (32, 32)).unwrap());
        }
        assert_eq!(vol.pixel(3, 4)[6 * 7..6 * 8], vol.frame(7).data[(4 * 32 + 3) * 6..(4 * 32 + 3) * 6 + 6]);
        assert!(matches!(stack_raymaps(&[], &k(), (4, 4)), Err(RaymapError::EmptyPoses)));
    }

    #[test]
    fn quaternion_encoding_has_zero_scalar() {
        let r = pose_to_raymap(&CameraPose::identity(), &k(), (4, 4)).unwrap();
        let q = r.quaternion_embedding();
        assert_eq!(q.len(), 4 * 16);
        assert!(q.chunks_exact(4).all(|c| c[0] == 0.0));
    }

    #[test]
    fn plkr_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let poses: Vec<_> = (0..3).map(|_| random_pose(&mut rng)).collect();
        let vol = stack_raymaps(&poses, &k(), (5, 4)).unwrap();
        let mut buf = Vec::new();
        write_plkr(&vol, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"PLKR");
        assert_eq!(buf.len(), 16 + 3 * 5 * 4 * 6 * 4);
        let back = read_plkr(buf.as_slice()).unwrap();
        for (a, b) in vol.frames.iter().zip(&back.frames) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*y, *x as f32 as f64);
            }
        }
        buf[0] = b'X';
        assert!(matches!(read_plkr(buf.as_slice()), Err(RaymapError::Format(_))));
    }
}
