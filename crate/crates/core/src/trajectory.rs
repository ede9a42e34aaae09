//! Camera trajectories: quaternion interpolation, upsampling and
//! procedural star-shaped exploration paths.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projection::window_rotation_matrix;
use crate::quaternion::Quaternion;
use crate::types::{CameraPose, CoreError, DepthMap};

pub const DEFAULT_FRAME_RATE: f64 = 12.0;
/// Minimum `|q_a · q_b|` accepted by [`lerp_pose`].
pub const LERP_CUTOFF: f64 = 0.05;
const SLERP_LERP_THRESHOLD: f64 = 1e-6;
const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("quaternions are nearly antipodal (|dot| = {0:.4}); use slerp")]
    NearAntipodal(f64),
    #[error("invalid trajectory: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub keyposes: Vec<(f64, CameraPose)>,
    pub frame_rate: f64,
    pub loop_closed: bool,
}

impl TrajectorySpec {
    pub fn new(keyposes: Vec<(f64, CameraPose)>, frame_rate: f64, loop_closed: bool) -> Result<Self, TrajectoryError> {
        let spec = Self {
            keyposes,
            frame_rate,
            loop_closed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Poses stamped at uniform `1 / frame_rate` spacing.
    pub fn uniform(poses: Vec<CameraPose>, frame_rate: f64) -> Result<Self, TrajectoryError> {
        let loop_closed = poses.len() > 1 && poses_match(&poses[0], poses.last().unwrap(), 1e-6);
        let keyposes = poses
            .into_iter()
            .enumerate()
            .map(|(i, p)| (i as f64 / frame_rate, p))
            .collect();
        Self::new(keyposes, frame_rate, loop_closed)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.keyposes.is_empty() {
            return Err(TrajectoryError::Invalid("no poses".into()));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(TrajectoryError::Invalid(format!("frame rate {}", self.frame_rate)));
        }
        if let Some(w) = self.keyposes.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(TrajectoryError::Invalid(format!(
                "timestamps not strictly increasing at {} -> {}",
                w[0].0, w[1].0
            )));
        }
        if self.loop_closed {
            let (a, b) = (&self.keyposes[0].1, &self.keyposes.last().unwrap().1);
            if !poses_match(a, b, 1e-6) {
                return Err(TrajectoryError::Invalid("loop-closed trajectory has distinct endpoints".into()));
            }
        }
        Ok(())
    }

    pub fn poses(&self) -> Vec<CameraPose> {
        self.keyposes.iter().map(|(_, p)| *p).collect()
    }

    pub fn len(&self) -> usize {
        self.keyposes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyposes.is_empty()
    }

    /// Pose at time `t`, slerped between the bracketing keyposes and
    /// clamped to the ends.
    pub fn pose_at(&self, t: f64) -> CameraPose {
        let kp = &self.keyposes;
        if t <= kp[0].0 {
            return kp[0].1;
        }
        if t >= kp.last().unwrap().0 {
            return kp.last().unwrap().1;
        }
        let i = kp.partition_point(|(ti, _)| *ti <= t) - 1;
        let (ta, a) = kp[i];
        let (tb, b) = kp[i + 1];
        interpolate_pose(&a, &b, (t - ta) / (tb - ta))
    }

    /// `n` poses at uniform times spanning the trajectory.
    pub fn resample(&self, n: usize) -> Result<TrajectorySpec, TrajectoryError> {
        if n < 2 {
            return Err(TrajectoryError::Invalid("resampling needs at least two frames".into()));
        }
        let (t0, t1) = (self.keyposes[0].0, self.keyposes.last().unwrap().0);
        let poses = (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.keyposes.last().unwrap().1
                } else {
                    self.pose_at(t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
                }
            })
            .collect();
        TrajectorySpec::uniform(poses, self.frame_rate)
    }
}

fn poses_match(a: &CameraPose, b: &CameraPose, tol: f64) -> bool {
    a.rotation().angle_to(b.rotation()) <= tol && (a.translation - b.translation).norm() <= tol
}

/// Spherical interpolation along the shorter arc. Returns a canonical
/// quaternion; near-identical inputs fall back to normalized LERP.
pub fn slerp(qa: Quaternion, qb: Quaternion, lambda: f64) -> Quaternion {
    let qa = qa.normalized();
    let mut qb = qb.normalized();
    if qa.dot(qb) < 0.0 {
        qb = qb.neg();
    }
    if lambda == 0.0 {
        return qa.canonical();
    }
    if lambda == 1.0 {
        return qb.canonical();
    }
    // half-angle between the 4-vectors, stable for small separations
    let theta = 2.0 * qb.add(qa.neg()).norm().atan2(qb.add(qa).norm());
    if theta < SLERP_LERP_THRESHOLD {
        return qa.scale(1.0 - lambda).add(qb.scale(lambda)).normalized().canonical();
    }
    let s = theta.sin();
    qa.scale(((1.0 - lambda) * theta).sin() / s)
        .add(qb.scale((lambda * theta).sin() / s))
        .normalized()
        .canonical()
}

/// Slerped rotation with linearly interpolated translation.
pub fn interpolate_pose(a: &CameraPose, b: &CameraPose, lambda: f64) -> CameraPose {
    if lambda == 0.0 {
        return *a;
    }
    if lambda == 1.0 {
        return *b;
    }
    let q = slerp(a.rotation(), b.rotation(), lambda);
    let t = a.translation * (1.0 - lambda) + b.translation * lambda;
    CameraPose::new(q, t).expect("interpolated pose is finite")
}

/// Normalized linear quaternion interpolation for small rotations.
pub fn lerp_pose(a: &CameraPose, b: &CameraPose, lambda: f64) -> Result<CameraPose, TrajectoryError> {
    let (qa, mut qb) = (a.rotation(), b.rotation());
    let dot = qa.dot(qb);
    if dot.abs() < LERP_CUTOFF {
        return Err(TrajectoryError::NearAntipodal(dot.abs()));
    }
    if qa.angle_to(qb) > 5f64.to_radians() {
        log::warn!(
            "lerp over {:.2}°; slerp is recommended above 5°",
            qa.angle_to(qb).to_degrees()
        );
    }
    if lambda == 0.0 {
        return Ok(*a);
    }
    if dot < 0.0 {
        qb = qb.neg();
    }
    let q = qa.scale(1.0 - lambda).add(qb.scale(lambda));
    let t = a.translation * (1.0 - lambda) + b.translation * lambda;
    Ok(CameraPose::new(q, t)?)
}

/// `n` poses from `a` to `b` inclusive.
pub fn interpolate_poses(a: &CameraPose, b: &CameraPose, n: usize) -> Vec<CameraPose> {
    match n {
        0 => Vec::new(),
        1 => vec![*a],
        _ => (0..n)
            .map(|i| interpolate_pose(a, b, i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Inserts interpolated poses until every adjacent pair rotates by at most
/// `max_rot_step` radians and moves by at most `max_trans_step` meters.
pub fn upsample_trajectory(
    spec: &TrajectorySpec,
    max_rot_step: f64,
    max_trans_step: f64,
) -> Result<TrajectorySpec, TrajectoryError> {
    if !(max_rot_step > 0.0 && max_trans_step > 0.0) {
        return Err(TrajectoryError::Invalid(format!(
            "step bounds must be positive (rotation {max_rot_step}, translation {max_trans_step})"
        )));
    }
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for w in spec.keyposes.windows(2) {
        let ((ta, a), (tb, b)) = (w[0], w[1]);
        out.push((ta, a));
        let rot = a.rotation().angle_to(b.rotation());
        let trans = (b.translation - a.translation).norm();
        let n = ((rot / max_rot_step - COUNT_EPS).ceil())
            .max((trans / max_trans_step - COUNT_EPS).ceil())
            .max(1.0) as usize;
        for k in 1..n {
            let lambda = k as f64 / n as f64;
            out.push((ta + lambda * (tb - ta), interpolate_pose(&a, &b, lambda)));
        }
    }
    out.push(*spec.keyposes.last().unwrap());
    TrajectorySpec::new(out, spec.frame_rate, spec.loop_closed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarOptions {
    pub frame_rate: f64,
    /// Horizontal field of view of the 9-ray probe fan, radians.
    pub fan_fov: f64,
    /// Spacing of waypoints along straight runs, meters.
    pub step: f64,
    /// Largest yaw change between consecutive waypoints, radians.
    pub turn_step: f64,
    /// Total yaw sweep of the scan at the far end of a run, radians.
    pub scan: f64,
    /// Radius of the U-turn arc at the far end; `None` turns in place.
    pub turn_radius: Option<f64>,
}

impl Default for StarOptions {
    fn default() -> Self {
        Self {
            frame_rate: DEFAULT_FRAME_RATE,
            fan_fov: 60f64.to_radians(),
            step: 0.25,
            turn_step: 10f64.to_radians(),
            scan: 60f64.to_radians(),
            turn_radius: None,
        }
    }
}

/// Probe result for one star direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarProbe {
    /// Panorama longitude of the direction.
    pub lon: f64,
    pub fan_mean_depth: f64,
    pub fan_min_depth: f64,
    pub accepted: bool,
    /// Length of the straight run (0 when rejected).
    pub run_length: f64,
}

/// World-frame horizontal unit vector at panorama longitude `lon`.
pub fn horizon_direction(lon: f64) -> Vector3<f64> {
    Vector3::new(lon.cos(), -lon.sin(), 0.0)
}

/// Panorama longitude of a horizontal world-frame offset.
pub fn horizon_lon(offset: &Vector3<f64>) -> f64 {
    (-offset.y).atan2(offset.x)
}

fn pose_facing(lon: f64, center: Vector3<f64>) -> CameraPose {
    CameraPose::from_matrix(&window_rotation_matrix(lon, 0.0), center).expect("yaw rotation is proper")
}

/// Depths of the 8 corner samples at `π/4` intervals.
pub fn corner_depths(depth_pano: &DepthMap) -> [f64; 8] {
    std::array::from_fn(|j| depth_pano.horizon_depth(j as f64 * PI / 4.0))
}

/// Probes `n_directions` evenly spaced longitudes. A direction is accepted
/// when the mean depth of its 9-ray fan reaches the nearest corner depth and
/// the fan leaves positive clearance after the safety margin.
pub fn probe_directions(
    depth_pano: &DepthMap,
    n_directions: usize,
    safety_margin: f64,
    fan_fov: f64,
) -> Vec<StarProbe> {
    let nearest_corner = corner_depths(depth_pano).into_iter().fold(f64::INFINITY, f64::min);
    (0..n_directions)
        .map(|k| {
            let lon = k as f64 * TAU / n_directions as f64;
            let fan: Vec<f64> = (0..9)
                .map(|i| depth_pano.horizon_depth(lon + fan_fov * (i as f64 / 8.0 - 0.5)))
                .collect();
            let mean = fan.iter().sum::<f64>() / 9.0;
            let min = fan.iter().cloned().fold(f64::INFINITY, f64::min);
            let clearance = min - safety_margin;
            let accepted = mean >= nearest_corner && clearance > 0.0;
            StarProbe {
                lon,
                fan_mean_depth: mean,
                fan_min_depth: min,
                accepted,
                run_length: if accepted { clearance } else { 0.0 },
            }
        })
        .collect()
}

/// Distance left to the depth boundary from `p` along its radial direction
/// from `center`.
pub fn radial_clearance(depth_pano: &DepthMap, center: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let off = p - center;
    let r = off.xy().norm();
    depth_pano.horizon_depth(horizon_lon(&off)) - r
}

struct PathBuilder {
    poses: Vec<(f64, CameraPose)>,
    yaw: f64,
    pos: Vector3<f64>,
}

impl PathBuilder {
    fn push(&mut self) {
        self.poses.push((0.0, pose_facing(self.yaw, self.pos)));
    }

    fn turn_to(&mut self, yaw: f64, step: f64) {
        let delta = yaw - self.yaw;
        let n = ((delta.abs() / step - COUNT_EPS).ceil() as usize).max(1);
        let start = self.yaw;
        for i in 1..=n {
            self.yaw = start + delta * i as f64 / n as f64;
            self.push();
        }
    }

    fn move_to(&mut self, target: Vector3<f64>, step: f64) {
        let start = self.pos;
        let n = (((target - start).norm() / step - COUNT_EPS).ceil() as usize).max(1);
        for i in 1..=n {
            self.pos = start + (target - start) * (i as f64 / n as f64);
            self.push();
        }
    }
}

/// Out-and-back exploration from `center` along every direction with enough
/// free depth, scanning at the far end of each run.
///
/// Falls back to an in-place rotation when no direction qualifies.
pub fn generate_star_trajectory(
    depth_pano: &DepthMap,
    center: Vector3<f64>,
    n_directions: usize,
    safety_margin: f64,
    options: &StarOptions,
) -> Result<TrajectorySpec, TrajectoryError> {
    if n_directions < 3 {
        return Err(TrajectoryError::Invalid(format!("need at least 3 directions, got {n_directions}")));
    }
    if !(safety_margin >= 0.0 && options.step > 0.0 && options.turn_step > 0.0) {
        return Err(TrajectoryError::Invalid("margin, step and turn step must be positive".into()));
    }
    let probes = probe_directions(depth_pano, n_directions, safety_margin, options.fan_fov);
    let mut b = PathBuilder {
        poses: Vec::new(),
        yaw: 0.0,
        pos: center,
    };
    b.push();
    if !probes.iter().any(|p| p.accepted) {
        log::warn!("no star direction has sufficient depth; emitting in-place rotation");
        for p in &probes[1..] {
            b.turn_to(p.lon, options.turn_step);
        }
        b.turn_to(TAU, options.turn_step);
    } else {
        for p in probes.iter().filter(|p| p.accepted) {
            b.turn_to(p.lon, options.turn_step);
            let dir = horizon_direction(p.lon);
            let safe = |pt: &Vector3<f64>| radial_clearance(depth_pano, &center, pt) >= safety_margin - 1e-9;
            let arc = options.turn_radius.and_then(|r0| {
                let mut r = r0.min(p.run_length / 2.0);
                for _ in 0..20 {
                    let pts = u_turn_points(&center, &dir, p.run_length, r, options.step);
                    if r > 0.0 && pts.iter().all(safe) {
                        return Some(r);
                    }
                    r /= 2.0;
                }
                None
            });
            match arc {
                Some(r) => {
                    // out on the left lane, arc around the far end, back on the right
                    let side = Vector3::z().cross(&dir);
                    let apex = center + dir * (p.run_length - r);
                    b.move_to(center + side * r, options.step);
                    b.move_to(apex + side * r, options.step);
                    let n = ((PI * r / options.step).ceil() as usize).max((PI / options.turn_step).ceil() as usize);
                    let yaw0 = b.yaw;
                    for i in 1..=n {
                        let a = PI * i as f64 / n as f64;
                        b.pos = apex + side * (r * a.cos()) + dir * (r * a.sin());
                        b.yaw = yaw0 + a;
                        b.push();
                    }
                    b.move_to(center - side * r, options.step);
                    b.move_to(center, options.step);
                    b.turn_to(b.yaw - PI, options.turn_step);
                }
                None => {
                    b.move_to(center + dir * p.run_length, options.step);
                    let base = b.yaw;
                    b.turn_to(base + options.scan / 2.0, options.turn_step);
                    b.turn_to(base - options.scan / 2.0, options.turn_step);
                    b.turn_to(base, options.turn_step);
                    b.move_to(center, options.step);
                }
            }
        }
        b.turn_to(TAU, options.turn_step);
    }
    let poses = b.poses.into_iter().map(|(_, p)| p).collect::<Vec<_>>();
    let mut spec = TrajectorySpec::uniform(poses, options.frame_rate)?;
    spec.loop_closed = true;
    spec.validate()?;
    Ok(spec)
}

fn u_turn_points(center: &Vector3<f64>, dir: &Vector3<f64>, run: f64, r: f64, step: f64) -> Vec<Vector3<f64>> {
    let side = Vector3::z().cross(dir);
    let apex = center + dir * (run - r);
    let n = ((PI * r / step).ceil() as usize).max(8);
    let mut pts = vec![center + side * r, apex + side * r];
    pts.extend((0..=n).map(|i| {
        let a = PI * i as f64 / n as f64;
        apex + side * (r * a.cos()) + dir * (r * a.sin())
    }));
    pts.push(center - side * r);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(rng: &mut ChaCha8Rng) -> Quaternion {
        Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalized()
    }

    fn at(q: Quaternion, t: [f64; 3]) -> CameraPose {
        CameraPose::new(q, Vector3::from(t)).unwrap()
    }

    #[test]
    fn slerp_identical_endpoints() {
        let q = Quaternion::from_axis_angle(Vector3::new(1.0, 2.0, 3.0), 1.1);
        for l in [0.0, 0.3, 0.7, 1.0] {
            assert!(slerp(q, q, l).angle_to(q) < 1e-12);
        }
    }

    #[test]
    fn slerp_half_of_quarter_turn() {
        let qb = Quaternion::from_axis_angle(Vector3::z(), PI / 2.0);
        let mid = slerp(Quaternion::IDENTITY, qb, 0.5);
        let h = PI / 8.0;
        assert!((mid.w - h.cos()).abs() < 1e-12 && (mid.z - h.sin()).abs() < 1e-12);
    }

    #[test]
    fn slerp_takes_short_arc() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let qa = random_q(&mut rng);
            let r = Quaternion::from_axis_angle(Vector3::new(rng.random(), rng.random(), 1.0), 0.2);
            let qb = qa.mul(r).neg();
            for l in [0.25, 0.5, 0.75] {
                assert!(qa.angle_to(slerp(qa, qb, l)) <= qa.angle_to(qb) + 1e-12);
            }
        }
    }

    #[test]
    fn slerp_geodesic_is_linear_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let (qa, qb) = (random_q(&mut rng), random_q(&mut rng));
            let total = qa.angle_to(qb);
            for i in 0..=20 {
                let l = i as f64 / 20.0;
                let q = slerp(qa, qb, l);
                assert!(q.is_unit());
                assert!((qa.angle_to(q) - l * total).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lerp_close_to_slerp_for_small_angles() {
        let a = at(Quaternion::IDENTITY, [0.0; 3]);
        let b = at(Quaternion::from_axis_angle(Vector3::new(0.3, 1.0, 0.0), 5f64.to_radians()), [2.0, 0.0, 0.0]);
        let mut worst = 0.0f64;
        for i in 0..=100 {
            let l = i as f64 / 100.0;
            let p = lerp_pose(&a, &b, l).unwrap();
            worst = worst.max(p.rotation().angle_to(slerp(a.rotation(), b.rotation(), l)));
        }
        assert!(worst.to_degrees() < 0.01);
        assert_eq!(lerp_pose(&a, &b, 0.0).unwrap(), a);
        let q = lerp_pose(&a, &b, 0.25).unwrap();
        assert!((q.translation - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lerp_rejects_near_antipodal() {
        let a = at(Quaternion::IDENTITY, [0.0; 3]);
        let b = at(Quaternion::from_axis_angle(Vector3::x(), PI * 0.99), [0.0; 3]);
        assert!(matches!(lerp_pose(&a, &b, 0.5), Err(TrajectoryError::NearAntipodal(_))));
    }

    #[test]
    fn upsample_noop_when_within_bounds() {
        let spec = TrajectorySpec::uniform(
            vec![at(Quaternion::IDENTITY, [0.0; 3]), at(Quaternion::from_axis_angle(Vector3::z(), 0.1), [0.1, 0.0, 0.0])],
            12.0,
        )
        .unwrap();
        assert_eq!(upsample_trajectory(&spec, 0.2, 0.5).unwrap(), spec);
    }

    #[test]
    fn upsample_ninety_degrees_in_thirty_degree_steps() {
        let a = at(Quaternion::IDENTITY, [0.0; 3]);
        let b = at(Quaternion::from_axis_angle(Vector3::z(), PI / 2.0), [0.0; 3]);
        let spec = TrajectorySpec::uniform(vec![a, b], 12.0).unwrap();
        let up = upsample_trajectory(&spec, PI / 6.0, 1.0).unwrap();
        assert_eq!(up.len(), 4);
        for (i, deg) in [(1, 30.0), (2, 60.0)] {
            let ang = a.rotation().angle_to(up.keyposes[i].1.rotation());
            assert!((ang.to_degrees() - deg).abs() < 1e-9);
        }
        assert_eq!(up.keyposes[0], spec.keyposes[0]);
        assert_eq!(up.keyposes[3], spec.keyposes[1]);
        assert_eq!(upsample_trajectory(&up, PI / 6.0, 1.0).unwrap(), up);
    }

    #[test]
    fn upsample_translation_bound_dominates() {
        let a = at(Quaternion::IDENTITY, [0.0; 3]);
        let b = at(Quaternion::from_axis_angle(Vector3::z(), PI / 2.0), [3.0, 0.0, 0.0]);
        let spec = TrajectorySpec::uniform(vec![a, b], 12.0).unwrap();
        let up = upsample_trajectory(&spec, PI / 6.0, 0.5).unwrap();
        assert_eq!(up.len() - 2, 5);
        assert!(upsample_trajectory(&spec, 0.0, 0.5).is_err());
    }

    #[test]
    fn timestamps_must_increase() {
        let p = CameraPose::identity();
        assert!(TrajectorySpec::new(vec![(0.0, p), (0.0, p)], 12.0, false).is_err());
    }

    fn circular_room(r: f64) -> DepthMap {
        DepthMap::constant(64, 32, r).unwrap()
    }

    fn square_room(half: f64) -> DepthMap {
        let (w, h) = (1024, 512);
        let data = (0..w * h)
            .map(|i| {
                let lon = ((i % w) as f64 + 0.5) / w as f64 * TAU - PI;
                half / lon.cos().abs().max(lon.sin().abs())
            })
            .collect();
        DepthMap::from_samples(w, h, data).unwrap()
    }

    #[test]
    fn circular_room_accepts_every_probe() {
        let r = 4.0;
        let depth = circular_room(r);
        let probes = probe_directions(&depth, 8, 0.2 * r, 60f64.to_radians());
        assert!(probes.iter().all(|p| p.accepted));
        let spec = generate_star_trajectory(&depth, Vector3::zeros(), 8, 0.2 * r, &StarOptions::default()).unwrap();
        for (_, p) in &spec.keyposes {
            assert!(p.translation.norm() <= 0.8 * r + 1e-9);
            assert!(radial_clearance(&depth, &Vector3::zeros(), &p.translation) >= 0.2 * r - 1e-9);
        }
        assert!(spec.loop_closed);
        let far = spec.keyposes.iter().map(|(_, p)| p.translation.norm()).fold(0.0, f64::max);
        assert!((far - 0.8 * r).abs() < 1e-9);
    }

    #[test]
    fn square_room_corners_are_deeper() {
        let depth = square_room(2.0);
        let c = corner_depths(&depth);
        for j in 0..8 {
            let expect = if j % 2 == 1 { 2.0 * 2f64.sqrt() } else { 2.0 };
            assert!((c[j] - expect).abs() / expect < 0.01, "corner {j}: {}", c[j]);
        }
    }

    #[test]
    fn degenerate_room_rotates_in_place() {
        let depth = circular_room(0.5);
        let spec = generate_star_trajectory(&depth, Vector3::new(1.0, 2.0, 0.0), 6, 0.5, &StarOptions::default()).unwrap();
        assert!(spec.len() > 6);
        for (_, p) in &spec.keyposes {
            assert_eq!(p.translation, Vector3::new(1.0, 2.0, 0.0));
        }
    }

    #[test]
    fn u_turn_arcs_stay_clear() {
        let depth = square_room(3.0);
        let opts = StarOptions {
            turn_radius: Some(2.0),
            ..StarOptions::default()
        };
        let spec = generate_star_trajectory(&depth, Vector3::zeros(), 4, 0.5, &opts).unwrap();
        for (_, p) in &spec.keyposes {
            assert!(radial_clearance(&depth, &Vector3::zeros(), &p.translation) >= 0.5 - 1e-6);
        }
        // timestamps at 12 fps
        assert!((spec.keyposes[1].0 - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn pose_at_interpolates_between_keys() {
        let a = at(Quaternion::IDENTITY, [0.0; 3]);
        let b = at(Quaternion::from_axis_angle(Vector3::z(), 0.4), [1.0, 0.0, 0.0]);
        let spec = TrajectorySpec::new(vec![(0.0, a), (2.0, b)], 12.0, false).unwrap();
        let m = spec.pose_at(0.5);
        assert!((m.translation.x - 0.25).abs() < 1e-12);
        assert!((a.rotation().angle_to(m.rotation()) - 0.1).abs() < 1e-12);
        let r = spec.resample(5).unwrap();
        assert_eq!(r.keyposes[4].1, b);
    }
}
