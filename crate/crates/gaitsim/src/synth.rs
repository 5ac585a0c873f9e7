//! Procedural walking avatar: subject-specific kinematics, capsule posing
//! and a small software rasterizer with controllable confounders.
//!
//! The avatar is a set of capsules, one per bone, posed by forward
//! kinematics over a fixed humanoid skeleton built from the subject's
//! segment lengths. Identity lives in the geometry (lengths, radii) and in
//! the gait parameters (amplitudes, phase quirk, cadence bias).

use crate::mocap::{canonical, forward_kinematics, JointDef, JointPose, MotionClip, Skeleton, WorldTransform};
use crate::raster::{BinarySilhouette, RgbImage};
use crate::rng;
use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid walker identity: {0}")]
    InvalidIdentity(String),
    #[error("invalid confounder config: {0}")]
    InvalidConfounders(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("avatar projects entirely outside the frame")]
    AvatarOutOfFrame,
}

/// Per-bone scalar set (millimetres for lengths and radii).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentValues {
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
    pub torso: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub neck_head: f64,
}

impl SegmentValues {
    fn all_positive(&self) -> bool {
        [self.thigh, self.shank, self.foot, self.torso, self.upper_arm, self.forearm, self.neck_head]
            .iter()
            .all(|v| *v > 0.0)
    }
}

/// Subject-specific body and gait parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerIdentity {
    pub segment_lengths: SegmentValues,
    pub segment_radii: SegmentValues,
    /// Hip swing amplitude, degrees in [0, 90].
    pub hip_amplitude: f64,
    /// Knee flexion amplitude, degrees in [0, 90].
    pub knee_amplitude: f64,
    /// Arm swing amplitude, degrees in [0, 90].
    pub arm_amplitude: f64,
    /// Per-subject offset between arm and leg oscillation, radians.
    pub phase_quirk: f64,
    /// Multiplicative factor on stride frequency, in [0.8, 1.2].
    pub cadence_bias: f64,
}

impl Default for WalkerIdentity {
    fn default() -> Self {
        Self {
            segment_lengths: SegmentValues {
                thigh: 450.0,
                shank: 430.0,
                foot: 220.0,
                torso: 500.0,
                upper_arm: 300.0,
                forearm: 280.0,
                neck_head: 250.0,
            },
            segment_radii: SegmentValues {
                thigh: 70.0,
                shank: 55.0,
                foot: 40.0,
                torso: 140.0,
                upper_arm: 45.0,
                forearm: 38.0,
                neck_head: 50.0,
            },
            hip_amplitude: 30.0,
            knee_amplitude: 40.0,
            arm_amplitude: 25.0,
            phase_quirk: 0.0,
            cadence_bias: 1.0,
        }
    }
}

impl WalkerIdentity {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !self.segment_lengths.all_positive() || !self.segment_radii.all_positive() {
            return Err(SynthError::InvalidIdentity("segment lengths and radii must be positive".into()));
        }
        for (name, a) in [
            ("hip_amplitude", self.hip_amplitude),
            ("knee_amplitude", self.knee_amplitude),
            ("arm_amplitude", self.arm_amplitude),
        ] {
            if !(0.0..=90.0).contains(&a) {
                return Err(SynthError::InvalidIdentity(format!("{name} must be in [0, 90] degrees")));
            }
        }
        if !(0.8..=1.2).contains(&self.cadence_bias) {
            return Err(SynthError::InvalidIdentity("cadence_bias must be in [0.8, 1.2]".into()));
        }
        Ok(())
    }

    /// Deterministic family of distinct subjects for fixtures and demos.
    pub fn preset(index: usize) -> WalkerIdentity {
        let u = |k: u64| rng::uniform3(0x1d5A_17, index as u64, k);
        WalkerIdentity {
            segment_lengths: SegmentValues {
                thigh: 380.0 + 140.0 * u(0),
                shank: 360.0 + 140.0 * u(1),
                foot: 190.0 + 60.0 * u(2),
                torso: 430.0 + 140.0 * u(3),
                upper_arm: 260.0 + 80.0 * u(4),
                forearm: 240.0 + 80.0 * u(5),
                neck_head: 220.0 + 60.0 * u(6),
            },
            segment_radii: SegmentValues {
                thigh: 55.0 + 30.0 * u(7),
                shank: 42.0 + 26.0 * u(8),
                foot: 32.0 + 16.0 * u(9),
                torso: 110.0 + 60.0 * u(10),
                upper_arm: 36.0 + 18.0 * u(11),
                forearm: 30.0 + 16.0 * u(12),
                neck_head: 40.0 + 20.0 * u(13),
            },
            hip_amplitude: 22.0 + 16.0 * u(14),
            knee_amplitude: 30.0 + 20.0 * u(15),
            arm_amplitude: 15.0 + 20.0 * u(16),
            phase_quirk: -0.4 + 0.8 * u(17),
            cadence_bias: 0.85 + 0.3 * u(18),
        }
    }

    pub fn leg_length(&self) -> f64 {
        self.segment_lengths.thigh + self.segment_lengths.shank
    }

    /// Hip height + torso + neck + head sphere.
    pub fn standing_height(&self) -> f64 {
        self.leg_length()
            + self.segment_lengths.torso
            + self.segment_lengths.neck_head
            + self.head_radius()
    }

    pub fn head_radius(&self) -> f64 {
        2.2 * self.segment_radii.neck_head
    }

    /// The fixed avatar skeleton for this subject.
    pub fn skeleton(&self) -> Skeleton {
        let l = &self.segment_lengths;
        let hip_w = 0.22 * l.thigh;
        // narrow enough that hanging arms overlap the trunk silhouette
        let shoulder_w = 0.22 * l.torso;
        let j = |name: &str, parent: Option<usize>, off: Vector3<f64>| JointDef {
            name: name.into(),
            parent,
            rest_offset: off,
            rest_orientation: UnitQuaternion::identity(),
        };
        // +X lateral (subject's left), +Y up, +Z walking direction
        Skeleton::new(vec![
            j("pelvis", None, Vector3::zeros()),
            j("l_hip", Some(PELVIS), Vector3::new(hip_w, 0.0, 0.0)),
            j("l_knee", Some(L_HIP), Vector3::new(0.0, -l.thigh, 0.0)),
            j("l_ankle", Some(L_KNEE), Vector3::new(0.0, -l.shank, 0.0)),
            j("l_toe", Some(L_ANKLE), Vector3::new(0.0, 0.0, l.foot)),
            j("r_hip", Some(PELVIS), Vector3::new(-hip_w, 0.0, 0.0)),
            j("r_knee", Some(R_HIP), Vector3::new(0.0, -l.thigh, 0.0)),
            j("r_ankle", Some(R_KNEE), Vector3::new(0.0, -l.shank, 0.0)),
            j("r_toe", Some(R_ANKLE), Vector3::new(0.0, 0.0, l.foot)),
            j("chest", Some(PELVIS), Vector3::new(0.0, l.torso, 0.0)),
            j("head_top", Some(CHEST), Vector3::new(0.0, l.neck_head, 0.0)),
            j("l_shoulder", Some(CHEST), Vector3::new(shoulder_w, 0.0, 0.0)),
            j("l_elbow", Some(L_SHOULDER), Vector3::new(0.0, -l.upper_arm, 0.0)),
            j("l_wrist", Some(L_ELBOW), Vector3::new(0.0, -l.forearm, 0.0)),
            j("r_shoulder", Some(CHEST), Vector3::new(-shoulder_w, 0.0, 0.0)),
            j("r_elbow", Some(R_SHOULDER), Vector3::new(0.0, -l.upper_arm, 0.0)),
            j("r_wrist", Some(R_ELBOW), Vector3::new(0.0, -l.forearm, 0.0)),
        ])
        .expect("avatar skeleton is valid by construction")
    }
}

const PELVIS: usize = 0;
const L_HIP: usize = 1;
const L_KNEE: usize = 2;
const L_ANKLE: usize = 3;
const R_HIP: usize = 5;
const R_KNEE: usize = 6;
const R_ANKLE: usize = 7;
const CHEST: usize = 9;
const HEAD_TOP: usize = 10;
const L_SHOULDER: usize = 11;
const L_ELBOW: usize = 12;
const R_SHOULDER: usize = 14;
const R_ELBOW: usize = 15;

/// Image-space occluder rectangle (pixels, top-left origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccluderRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// The controllable confounding factors of one rendering condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfounderConfig {
    /// Degrees in [0, 180]. 0 views the sagittal plane (profile), 90 frontal.
    pub azimuth: f64,
    /// Degrees in [0, 90].
    pub elevation: f64,
    /// Capsule radius multiplier, >= 1.
    pub clothing_bulk: f64,
    /// km/h in [3, 12].
    pub speed: f64,
    /// Probability of flipping each silhouette-boundary pixel, in [0, 1).
    pub boundary_noise: f64,
    pub occluder: Option<OccluderRect>,
    pub background_color: [u8; 3],
    /// Direction light travels (shaded mode only).
    pub light_direction: Vector3<f64>,
}

impl Default for ConfounderConfig {
    fn default() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
            clothing_bulk: 1.0,
            speed: 5.0,
            boundary_noise: 0.0,
            occluder: None,
            background_color: [0, 200, 0],
            light_direction: Vector3::new(0.4, -1.0, 0.3),
        }
    }
}

impl ConfounderConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=180.0).contains(&self.azimuth) {
            return Err(SynthError::InvalidConfounders("azimuth must be in [0, 180] degrees".into()));
        }
        if !(0.0..=90.0).contains(&self.elevation) {
            return Err(SynthError::InvalidConfounders("elevation must be in [0, 90] degrees".into()));
        }
        if self.clothing_bulk < 1.0 {
            return Err(SynthError::InvalidConfounders("clothing_bulk must be >= 1".into()));
        }
        if !(3.0..=12.0).contains(&self.speed) {
            return Err(SynthError::InvalidConfounders("speed must be in [3, 12] km/h".into()));
        }
        if !(0.0..1.0).contains(&self.boundary_noise) {
            return Err(SynthError::InvalidConfounders("boundary_noise must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Parallel projection; world millimetres per pixel.
    Orthographic { mm_per_px: f64 },
    /// Pinhole projection; focal length in pixels.
    Perspective { focal_px: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    /// Distance from target, millimetres.
    pub distance: f64,
    pub projection: Projection,
    pub width: usize,
    pub height: usize,
    /// Look-at point in world space.
    pub target: Vector3<f64>,
}

impl Camera {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidCamera("image dimensions must be positive".into()));
        }
        if !(self.distance > 0.0) {
            return Err(SynthError::InvalidCamera("distance must be positive".into()));
        }
        Ok(())
    }

    fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let az = self.azimuth.to_radians();
        let el = self.elevation.to_radians();
        let dir = Vector3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin());
        let position = self.target + dir * self.distance;
        let forward = -dir;
        let up_ref = if forward.y.abs() > 0.999 { Vector3::z() } else { Vector3::y() };
        let right = forward.cross(&up_ref).normalize();
        let up = right.cross(&forward);
        (position, forward, right, up)
    }
}

/// Rendering geometry shared by every frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    pub distance: f64,
    pub projection: Projection,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            distance: 4000.0,
            projection: Projection::Orthographic { mm_per_px: 34.0 },
        }
    }
}

impl RenderSettings {
    pub fn camera_for(&self, identity: &WalkerIdentity, confounders: &ConfounderConfig) -> Camera {
        Camera {
            azimuth: confounders.azimuth,
            elevation: confounders.elevation,
            distance: self.distance,
            projection: self.projection,
            width: self.width,
            height: self.height,
            target: Vector3::new(0.0, identity.standing_height() * 0.5, 0.0),
        }
    }
}

/// Stride (full gait cycle) frequency in Hz for a walking speed in km/h.
pub fn stride_frequency(identity: &WalkerIdentity, speed: f64) -> f64 {
    (0.5 + 0.08 * speed) * identity.cadence_bias
}

/// Deterministic treadmill-convention walking clip.
///
/// Hips swing sinusoidally in left/right antiphase, knees follow a
/// flexion-only rectified sinusoid a quarter cycle behind the ipsilateral
/// hip, arms swing in antiphase to the ipsilateral leg plus the subject's
/// phase quirk, and the root bobs vertically at twice the stride frequency.
pub fn synthesize_kinematics(
    identity: &WalkerIdentity,
    speed: f64,
    duration: f64,
    fps: f64,
) -> Result<MotionClip, SynthError> {
    identity.validate()?;
    if !(3.0..=12.0).contains(&speed) {
        return Err(SynthError::InvalidConfounders("speed must be in [3, 12] km/h".into()));
    }
    if !(duration > 0.0) || !(fps > 0.0) {
        return Err(SynthError::InvalidConfounders("duration and fps must be positive".into()));
    }
    let skeleton = identity.skeleton();
    let f = stride_frequency(identity, speed);
    let a_hip = identity.hip_amplitude.to_radians();
    let a_knee = identity.knee_amplitude.to_radians();
    let a_arm = identity.arm_amplitude.to_radians();
    let hip_height = identity.leg_length();
    // bob amplitude scales with hip swing so a zero-amplitude identity
    // stands perfectly still; at the default 30 degree swing it is 2% of
    // leg length
    let bob_amp = 0.02 * hip_height * (identity.hip_amplitude / 30.0);
    let n_frames = ((duration * fps).round() as usize).max(1);

    let rot_x = |angle: f64| {
        canonical(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle))
    };
    let frames: Vec<Vec<JointPose>> = (0..n_frames)
        .map(|k| {
            let t = k as f64 / fps;
            let phi = std::f64::consts::TAU * f * t;
            let mut poses: Vec<JointPose> = skeleton
                .joints()
                .iter()
                .map(|j| JointPose::identity(j.parent.is_none()))
                .collect();
            poses[PELVIS].translation =
                Some(Vector3::new(0.0, hip_height + bob_amp * (2.0 * phi).sin(), 0.0));
            poses[L_HIP].rotation = rot_x(a_hip * phi.sin());
            poses[R_HIP].rotation = rot_x(a_hip * (phi + std::f64::consts::PI).sin());
            poses[L_KNEE].rotation =
                rot_x(a_knee * (phi - std::f64::consts::FRAC_PI_2).sin().max(0.0));
            poses[R_KNEE].rotation =
                rot_x(a_knee * (phi + std::f64::consts::FRAC_PI_2).sin().max(0.0));
            let arm_phase = phi + std::f64::consts::PI + identity.phase_quirk;
            poses[L_SHOULDER].rotation = rot_x(a_arm * arm_phase.sin());
            poses[R_SHOULDER].rotation =
                rot_x(a_arm * (arm_phase + std::f64::consts::PI).sin());
            poses
        })
        .collect();
    Ok(MotionClip::new(skeleton, fps, frames).expect("synthesized clip is valid"))
}

/// A 3D capsule (or sphere when the endpoints coincide).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

const BONES: [(usize, usize); 13] = [
    (L_HIP, L_KNEE),
    (L_KNEE, L_ANKLE),
    (L_ANKLE, L_ANKLE + 1),
    (R_HIP, R_KNEE),
    (R_KNEE, R_ANKLE),
    (R_ANKLE, R_ANKLE + 1),
    (PELVIS, CHEST),
    (CHEST, HEAD_TOP),
    (L_SHOULDER, L_ELBOW),
    (L_ELBOW, L_ELBOW + 1),
    (R_SHOULDER, R_ELBOW),
    (R_ELBOW, R_ELBOW + 1),
    (HEAD_TOP, HEAD_TOP), // head sphere
];

fn bone_radius(identity: &WalkerIdentity, bone: usize) -> f64 {
    let r = &identity.segment_radii;
    match bone {
        0 | 3 => r.thigh,
        1 | 4 => r.shank,
        2 | 5 => r.foot,
        6 => r.torso,
        7 => r.neck_head,
        8 | 10 => r.upper_arm,
        9 | 11 => r.forearm,
        12 => identity.head_radius(),
        _ => unreachable!(),
    }
}

/// One capsule per bone at the posed joint positions, radii scaled by the
/// clothing bulk factor, plus a sphere for the head.
pub fn pose_capsules(
    world: &[WorldTransform],
    identity: &WalkerIdentity,
    clothing_bulk: f64,
) -> Vec<Capsule> {
    BONES
        .iter()
        .enumerate()
        .map(|(bi, &(p, c))| Capsule {
            a: world[p].position,
            b: world[c].position,
            radius: bone_radius(identity, bi) * clothing_bulk,
        })
        .collect()
}

/// Closest distance between the ray `o + t d` (t >= 0, d unit) and the
/// segment `a..b`, plus the ray parameter of the closest approach.
fn ray_segment_distance(
    o: Vector3<f64>,
    d: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
) -> (f64, f64, f64) {
    let u = b - a;
    let w0 = o - a;
    let uu = u.dot(&u);
    if uu < 1e-18 {
        // degenerate segment: point-ray distance
        let t = d.dot(&(a - o)).max(0.0);
        let p = o + d * t;
        return ((p - a).norm(), t, 0.0);
    }
    let ud = u.dot(&d);
    let uw = u.dot(&w0);
    let dw = d.dot(&w0);
    // minimize |o + t d - (a + s u)| over t >= 0, s in [0,1]
    let denom = uu - ud * ud; // |d|=1
    let mut s = if denom.abs() > 1e-12 { (uw - ud * dw) / denom } else { 0.0 };
    s = s.clamp(0.0, 1.0);
    let mut t = ud * s - dw;
    if t < 0.0 {
        t = 0.0;
        s = (uw / uu).clamp(0.0, 1.0);
    }
    let p_ray = o + d * t;
    let p_seg = a + u * s;
    ((p_ray - p_seg).norm(), t, s)
}

struct Hit {
    t: f64,
    capsule: usize,
    normal: Vector3<f64>,
}

struct RaySetup {
    position: Vector3<f64>,
    forward: Vector3<f64>,
    right: Vector3<f64>,
    up: Vector3<f64>,
}

impl RaySetup {
    fn ray(&self, cam: &Camera, row: usize, col: usize) -> (Vector3<f64>, Vector3<f64>) {
        let u = col as f64 + 0.5 - cam.width as f64 / 2.0;
        let v = cam.height as f64 / 2.0 - (row as f64 + 0.5);
        match cam.projection {
            Projection::Orthographic { mm_per_px } => {
                let origin = cam.target + self.right * (u * mm_per_px) + self.up * (v * mm_per_px)
                    - self.forward * cam.distance;
                (origin, self.forward)
            }
            Projection::Perspective { focal_px } => {
                let dir =
                    (self.forward + self.right * (u / focal_px) + self.up * (v / focal_px)).normalize();
                (self.position, dir)
            }
        }
    }

    /// Pixel-space bounding box of a capsule, expanded by one pixel.
    fn capsule_bbox(&self, cam: &Camera, c: &Capsule) -> Option<(usize, usize, usize, usize)> {
        let project = |p: Vector3<f64>| -> Option<(f64, f64, f64)> {
            let q = p - cam.target;
            match cam.projection {
                Projection::Orthographic { mm_per_px } => {
                    let u = q.dot(&self.right) / mm_per_px;
                    let v = q.dot(&self.up) / mm_per_px;
                    Some((u, v, 1.0 / mm_per_px))
                }
                Projection::Perspective { focal_px } => {
                    let r = p - self.position;
                    let z = r.dot(&self.forward);
                    if z <= 1.0 {
                        return None;
                    }
                    Some((r.dot(&self.right) / z * focal_px, r.dot(&self.up) / z * focal_px, focal_px / z))
                }
            }
        };
        let (mut lo_u, mut hi_u) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lo_v, mut hi_v) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in [c.a, c.b] {
            let (u, v, px_per_mm) = project(p)?;
            let r_px = c.radius * px_per_mm;
            lo_u = lo_u.min(u - r_px);
            hi_u = hi_u.max(u + r_px);
            lo_v = lo_v.min(v - r_px);
            hi_v = hi_v.max(v + r_px);
        }
        let w = cam.width as f64;
        let h = cam.height as f64;
        let col0 = (lo_u + w / 2.0 - 1.5).floor().max(0.0) as usize;
        let col1 = ((hi_u + w / 2.0 + 1.5).ceil().min(w - 1.0)).max(0.0) as usize;
        let row0 = (h / 2.0 - hi_v - 1.5).floor().max(0.0) as usize;
        let row1 = ((h / 2.0 - lo_v + 1.5).ceil().min(h - 1.0)).max(0.0) as usize;
        if col0 > col1 || row0 > row1 {
            return None;
        }
        Some((row0, col0, row1, col1))
    }
}

fn trace(capsules: &[Capsule], cam: &Camera) -> Vec<Option<Hit>> {
    let (position, forward, right, up) = cam.basis();
    let setup = RaySetup { position, forward, right, up };
    let mut hits: Vec<Option<Hit>> = (0..cam.width * cam.height).map(|_| None).collect();
    for (ci, c) in capsules.iter().enumerate() {
        let Some((row0, col0, row1, col1)) = setup.capsule_bbox(cam, c) else {
            continue;
        };
        for row in row0..=row1 {
            for col in col0..=col1 {
                let (o, d) = setup.ray(cam, row, col);
                let (dist, t_ray, _) = ray_segment_distance(o, d, c.a, c.b);
                if dist > c.radius {
                    continue;
                }
                let t_hit = t_ray - (c.radius * c.radius - dist * dist).max(0.0).sqrt();
                let idx = row * cam.width + col;
                if hits[idx].as_ref().is_none_or(|h| t_hit < h.t) {
                    let hit_point = o + d * t_hit;
                    let (_, _, s) = ray_segment_distance(hit_point, d, c.a, c.b);
                    let axis_pt = c.a + (c.b - c.a) * s;
                    let n = hit_point - axis_pt;
                    let normal = if n.norm() > 1e-9 { n.normalize() } else { -d };
                    hits[idx] = Some(Hit { t: t_hit, capsule: ci, normal });
                }
            }
        }
    }
    hits
}

/// Exact binary silhouette of the capsule set: a pixel is foreground iff
/// its view ray intersects any capsule. No anti-aliasing.
pub fn render_silhouette(capsules: &[Capsule], camera: &Camera) -> Result<BinarySilhouette, SynthError> {
    camera.validate()?;
    let hits = trace(capsules, camera);
    let mask: Vec<bool> = hits.iter().map(Option::is_some).collect();
    if !mask.iter().any(|&m| m) {
        return Err(SynthError::AvatarOutOfFrame);
    }
    Ok(BinarySilhouette { width: camera.width, height: camera.height, mask })
}

const PALETTE: [[u8; 3]; 6] = [
    [70, 90, 160],  // legs
    [60, 80, 140],
    [50, 50, 60],   // feet
    [150, 60, 60],  // torso / arms
    [200, 170, 140],
    [120, 100, 80],
];

fn capsule_color(bone: usize) -> [u8; 3] {
    match bone {
        0 | 3 => PALETTE[0],        // thighs
        1 | 4 => PALETTE[1],        // shanks
        2 | 5 => PALETTE[2],        // feet
        6 => PALETTE[3],            // torso
        8..=11 => PALETTE[3],       // arms share the torso garment color
        7 | 12 => PALETTE[4],       // neck + head
        _ => PALETTE[5],
    }
}

const OCCLUDER_COLOR: [u8; 3] = [70, 60, 50];

/// Shaded RGB frame: Lambert-lit capsules over a uniform background, with
/// optional boundary-pixel noise and an optional occluder rectangle.
///
/// `noise_key` seeds the per-pixel noise stream; pass the same key for
/// bit-identical output.
pub fn render_shaded(
    capsules: &[Capsule],
    camera: &Camera,
    confounders: &ConfounderConfig,
    noise_key: u64,
) -> Result<RgbImage, SynthError> {
    camera.validate()?;
    confounders.validate()?;
    let hits = trace(capsules, camera);
    if !hits.iter().any(Option::is_some) {
        return Err(SynthError::AvatarOutOfFrame);
    }
    let light = -confounders.light_direction.normalize();
    let mut img = RgbImage::filled(camera.width, camera.height, confounders.background_color);
    for (idx, hit) in hits.iter().enumerate() {
        if let Some(h) = hit {
            let lambert = h.normal.dot(&light).max(0.0);
            let base = capsule_color(h.capsule);
            let shade = |c: u8| ((c as f64) * (0.25 + 0.75 * lambert)).round() as u8;
            let mut color = [shade(base[0]), shade(base[1]), shade(base[2])];
            if color == confounders.background_color {
                // keep the chroma key exact: a shaded pixel never equals the background
                color[0] = color[0].wrapping_add(1);
            }
            img.pixels[idx] = color;
        }
    }

    if confounders.boundary_noise > 0.0 {
        let w = camera.width as i64;
        let h = camera.height as i64;
        let fg = |i: i64, j: i64| -> bool {
            i >= 0 && j >= 0 && i < h && j < w && hits[(i * w + j) as usize].is_some()
        };
        let shaded = img.clone();
        for row in 0..h {
            for col in 0..w {
                let idx = (row * w + col) as usize;
                let here = hits[idx].is_some();
                let neighbors = [(row - 1, col), (row + 1, col), (row, col - 1), (row, col + 1)];
                let boundary = neighbors.iter().any(|&(r, c)| fg(r, c) != here);
                if !boundary {
                    continue;
                }
                if rng::uniform3(noise_key, idx as u64, 0) < confounders.boundary_noise {
                    if here {
                        img.pixels[idx] = confounders.background_color;
                    } else if let Some(&(r, c)) =
                        neighbors.iter().find(|&&(r, c)| fg(r, c))
                    {
                        img.pixels[idx] = shaded.pixels[(r * w + c) as usize];
                    }
                }
            }
        }
    }

    if let Some(rect) = confounders.occluder {
        for row in rect.y..(rect.y + rect.height).min(camera.height) {
            for col in rect.x..(rect.x + rect.width).min(camera.width) {
                img.set(row, col, OCCLUDER_COLOR);
            }
        }
    }
    Ok(img)
}

/// Ground-truth gait cycle boundaries as half-open frame ranges.
pub fn ground_truth_cycles(identity: &WalkerIdentity, speed: f64, fps: f64, n_frames: usize) -> Vec<(usize, usize)> {
    let period = fps / stride_frequency(identity, speed);
    let mut cycles = Vec::new();
    let mut i = 0usize;
    loop {
        let start = ((i as f64) * period).round() as usize;
        let end = ((i as f64 + 1.0) * period).round() as usize;
        if end > n_frames {
            break;
        }
        cycles.push((start, end));
        i += 1;
    }
    cycles
}

/// Shaded frames plus ground-truth cycle boundaries for one condition.
pub struct SequenceOutput {
    pub frames: Vec<RgbImage>,
    pub cycles: Vec<(usize, usize)>,
}

/// Full synthesis: kinematics, forward kinematics, capsule posing and
/// shaded rendering per frame. Fully determined by its arguments; frames
/// render in parallel with bit-identical results.
pub fn generate_sequence(
    identity: &WalkerIdentity,
    confounders: &ConfounderConfig,
    settings: &RenderSettings,
    duration: f64,
    fps: f64,
    seed: u64,
) -> Result<SequenceOutput, SynthError> {
    confounders.validate()?;
    let clip = synthesize_kinematics(identity, confounders.speed, duration, fps)?;
    let camera = settings.camera_for(identity, confounders);
    let frames: Vec<RgbImage> = clip
        .frames
        .par_iter()
        .enumerate()
        .map(|(fi, frame)| {
            let world = forward_kinematics(&clip.skeleton, frame);
            let capsules = pose_capsules(&world, identity, confounders.clothing_bulk);
            render_shaded(&capsules, &camera, confounders, rng::derive(seed, fi as u64))
        })
        .collect::<Result<_, _>>()?;
    let cycles = ground_truth_cycles(identity, confounders.speed, fps, frames.len());
    Ok(SequenceOutput { frames, cycles })
}

/// Binary silhouettes straight from the renderer (no shading or noise).
pub fn generate_silhouettes(
    identity: &WalkerIdentity,
    confounders: &ConfounderConfig,
    settings: &RenderSettings,
    duration: f64,
    fps: f64,
) -> Result<Vec<BinarySilhouette>, SynthError> {
    confounders.validate()?;
    let clip = synthesize_kinematics(identity, confounders.speed, duration, fps)?;
    let camera = settings.camera_for(identity, confounders);
    clip.frames
        .par_iter()
        .map(|frame| {
            let world = forward_kinematics(&clip.skeleton, frame);
            let capsules = pose_capsules(&world, identity, confounders.clothing_bulk);
            render_silhouette(&capsules, &camera)
        })
        .collect()
}

/// Azimuth 0-180 x elevation 0-90 grid at the given step (degrees).
/// At a 5 degree step this is 37 x 19 = 703 viewpoint pairs.
pub fn viewpoint_grid(step: f64) -> Vec<(f64, f64)> {
    assert!(step > 0.0);
    let mut out = Vec::new();
    let n_az = (180.0 / step).floor() as usize;
    let n_el = (90.0 / step).floor() as usize;
    for ai in 0..=n_az {
        for ei in 0..=n_el {
            out.push((ai as f64 * step, ei as f64 * step));
        }
    }
    out
}
