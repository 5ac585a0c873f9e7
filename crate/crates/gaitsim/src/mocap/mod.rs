//! Motion-capture ingestion: skeletons, clips, parsing, resampling,
//! retargeting and forward kinematics.
//!
//! Skeletons are stored in topological order (parent index strictly below
//! the child's own index) so hierarchy walks are simple forward scans.
//! All rotations are unit quaternions stored with a non-negative scalar
//! part, which resolves the double cover deterministically.

mod bvh;
mod stream;

pub use bvh::parse_bvh;
pub use stream::{parse_joint_csv, serialize_joint_csv};

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MocapError {
    #[error("line {line}: missing section: {section}")]
    MissingSection { section: String, line: usize },
    #[error("line {line}: motion row has {got} values but {expected} channels are declared")]
    ChannelMismatch { expected: usize, got: usize, line: usize },
    #[error("line {line}: malformed number '{token}'")]
    MalformedNumber { token: String, line: usize },
    #[error("line {line}: unsupported channel order: {detail}")]
    UnsupportedChannelOrder { detail: String, line: usize },
    #[error("line {line}: frame {frame} lacks a row for joint '{joint}'")]
    MissingJointRow { frame: usize, joint: String, line: usize },
    #[error("line {line}: quaternion norm {norm} deviates from 1 by more than 1e-3")]
    NonUnitQuaternion { norm: f64, line: usize },
    #[error("line {line}: unknown joint name '{name}'")]
    UnknownJointName { name: String, line: usize },
    #[error("clip has no frames")]
    EmptyClip,
    #[error("target joint '{0}' is not covered by the name map")]
    UnmappedJoint(String),
    #[error("mapped parent relationships disagree at joint '{0}'")]
    IncompatibleHierarchy(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
}

/// Return the double-cover representative with a non-negative scalar part.
pub fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.coords; // (x, y, z, w)
    let flip = c.w < 0.0
        || (c.w == 0.0 && (c.x < 0.0 || (c.x == 0.0 && (c.y < 0.0 || (c.y == 0.0 && c.z < 0.0)))));
    if flip {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDef {
    pub name: String,
    /// None for the root; otherwise an index strictly below this joint's own.
    pub parent: Option<usize>,
    /// Offset from the parent joint in the parent frame, millimetres.
    pub rest_offset: Vector3<f64>,
    /// Joint frame relative to the parent rest frame.
    pub rest_orientation: UnitQuaternion<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<JointDef>,
}

impl Skeleton {
    pub fn new(joints: Vec<JointDef>) -> Result<Self, MocapError> {
        if joints.is_empty() {
            return Err(MocapError::InvalidSkeleton("no joints".into()));
        }
        let mut roots = 0;
        let mut names = std::collections::HashSet::new();
        for (i, j) in joints.iter().enumerate() {
            match j.parent {
                None => roots += 1,
                Some(p) if p >= i => {
                    return Err(MocapError::InvalidSkeleton(format!(
                        "joint '{}' has parent index {} >= own index {}",
                        j.name, p, i
                    )))
                }
                Some(_) => {}
            }
            if !names.insert(j.name.clone()) {
                return Err(MocapError::InvalidSkeleton(format!(
                    "duplicate joint name '{}'",
                    j.name
                )));
            }
            if (j.rest_orientation.into_inner().norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(MocapError::InvalidSkeleton(format!(
                    "joint '{}' rest orientation is not unit norm",
                    j.name
                )));
            }
        }
        if roots != 1 {
            return Err(MocapError::InvalidSkeleton(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[JointDef] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Sum of rest-offset lengths along the longest root-to-leaf chain.
    /// In a humanoid this is the leg chain, which dominates silhouette scale.
    pub fn leg_chain_length(&self) -> f64 {
        let mut best = vec![0.0f64; self.joints.len()];
        let mut max = 0.0f64;
        for (i, j) in self.joints.iter().enumerate() {
            best[i] = match j.parent {
                None => 0.0,
                Some(p) => best[p] + j.rest_offset.norm(),
            };
            max = max.max(best[i]);
        }
        max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointPose {
    /// Rotation relative to the parent frame (unit, non-negative scalar part).
    pub rotation: UnitQuaternion<f64>,
    /// Present iff the joint is the root. Millimetres.
    pub translation: Option<Vector3<f64>>,
}

impl JointPose {
    pub fn identity(is_root: bool) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: is_root.then(Vector3::zeros),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub skeleton: Skeleton,
    /// Frames per second.
    pub rate: f64,
    /// One JointPose per joint per frame, in skeleton order.
    pub frames: Vec<Vec<JointPose>>,
}

impl MotionClip {
    pub fn new(skeleton: Skeleton, rate: f64, frames: Vec<Vec<JointPose>>) -> Result<Self, MocapError> {
        if !(rate > 0.0) {
            return Err(MocapError::InvalidClip("rate must be positive".into()));
        }
        if frames.is_empty() {
            return Err(MocapError::InvalidClip("clip must have at least one frame".into()));
        }
        for (fi, frame) in frames.iter().enumerate() {
            if frame.len() != skeleton.len() {
                return Err(MocapError::InvalidClip(format!(
                    "frame {} has {} poses for {} joints",
                    fi,
                    frame.len(),
                    skeleton.len()
                )));
            }
            for (ji, pose) in frame.iter().enumerate() {
                let is_root = skeleton.joints()[ji].parent.is_none();
                if pose.translation.is_some() != is_root {
                    return Err(MocapError::InvalidClip(format!(
                        "frame {fi} joint {ji}: translation present iff root"
                    )));
                }
                if (pose.rotation.into_inner().norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(MocapError::InvalidClip(format!(
                        "frame {fi} joint {ji}: non-unit rotation"
                    )));
                }
            }
        }
        Ok(Self { skeleton, rate, frames })
    }

    pub fn duration_seconds(&self) -> f64 {
        (self.frames.len().saturating_sub(1)) as f64 / self.rate
    }
}

/// World-space rigid transform of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldTransform {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// World transform per joint: parent transform, then the rest offset
/// translation, the rest orientation and the pose rotation. The root
/// additionally applies the pose translation.
pub fn forward_kinematics(skeleton: &Skeleton, frame: &[JointPose]) -> Vec<WorldTransform> {
    debug_assert_eq!(skeleton.len(), frame.len());
    let mut out: Vec<WorldTransform> = Vec::with_capacity(skeleton.len());
    for (i, j) in skeleton.joints().iter().enumerate() {
        let t = match j.parent {
            None => {
                let translation = frame[i].translation.unwrap_or_else(Vector3::zeros);
                WorldTransform {
                    position: j.rest_offset + translation,
                    orientation: j.rest_orientation * frame[i].rotation,
                }
            }
            Some(p) => {
                let parent = out[p];
                WorldTransform {
                    position: parent.position + parent.orientation * j.rest_offset,
                    orientation: parent.orientation * j.rest_orientation * frame[i].rotation,
                }
            }
        };
        out.push(t);
    }
    out
}

/// Resample a clip to a new frame rate.
///
/// Root translations are interpolated linearly, rotations spherically along
/// the shortest arc. When the sample time lands exactly on a source frame
/// the source frame is copied bit-for-bit.
pub fn resample(clip: &MotionClip, target_rate: f64) -> Result<MotionClip, MocapError> {
    if clip.frames.is_empty() {
        return Err(MocapError::EmptyClip);
    }
    assert!(target_rate > 0.0, "target rate must be positive");
    let duration = clip.duration_seconds();
    let n_out = (duration * target_rate).round() as usize + 1;
    let mut frames = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let t = (k as f64 / target_rate).min(duration);
        let s = t * clip.rate;
        let i = s.round();
        if (s - i).abs() < 1e-9 {
            frames.push(clip.frames[i as usize].clone());
            continue;
        }
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(clip.frames.len() - 1);
        let alpha = s - i0 as f64;
        let frame = clip.frames[i0]
            .iter()
            .zip(&clip.frames[i1])
            .map(|(a, b)| JointPose {
                rotation: canonical(slerp_shortest(a.rotation, b.rotation, alpha)),
                translation: match (a.translation, b.translation) {
                    (Some(ta), Some(tb)) => Some(ta + (tb - ta) * alpha),
                    _ => None,
                },
            })
            .collect();
        frames.push(frame);
    }
    MotionClip::new(clip.skeleton.clone(), target_rate, frames)
}

/// Shortest-arc slerp with a linear fallback for near-identical rotations.
pub fn slerp_shortest(
    a: UnitQuaternion<f64>,
    b: UnitQuaternion<f64>,
    t: f64,
) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let mut qb = b.into_inner();
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let angle = dot.clamp(-1.0, 1.0).acos();
    if angle < 1e-5 {
        // lerp + renormalize
        let q = qa * (1.0 - t) + qb * t;
        return UnitQuaternion::new_unchecked(q.normalize());
    }
    let sin = angle.sin();
    let q = qa * ((1.0 - t) * angle).sin() / sin + qb * (t * angle).sin() / sin;
    UnitQuaternion::new_unchecked(q.normalize())
}

/// Transfer motion from a source rig onto a target rig with mismatched
/// rest conventions.
///
/// The fixed rest-orientation discrepancy between the two joint frames is
/// compensated by conjugation; the root translation is rescaled by the
/// ratio of the rigs' leg-chain lengths.
pub fn retarget(
    clip: &MotionClip,
    target: &Skeleton,
    name_map: &std::collections::HashMap<String, String>,
) -> Result<MotionClip, MocapError> {
    // map target joint index -> source joint index
    let mut src_of = Vec::with_capacity(target.len());
    for tj in target.joints() {
        let src_name = name_map
            .iter()
            .find(|(_, tgt)| tgt.as_str() == tj.name)
            .map(|(src, _)| src.as_str())
            .ok_or_else(|| MocapError::UnmappedJoint(tj.name.clone()))?;
        let si = clip
            .skeleton
            .index_of(src_name)
            .ok_or_else(|| MocapError::UnknownJointName { name: src_name.to_string(), line: 0 })?;
        src_of.push(si);
    }
    // mapped parent relationships must agree
    for (ti, tj) in target.joints().iter().enumerate() {
        let si = src_of[ti];
        let sp = clip.skeleton.joints()[si].parent;
        match tj.parent {
            None => {
                if sp.is_some() {
                    return Err(MocapError::IncompatibleHierarchy(tj.name.clone()));
                }
            }
            Some(tp) => {
                if sp != Some(src_of[tp]) {
                    return Err(MocapError::IncompatibleHierarchy(tj.name.clone()));
                }
            }
        }
    }

    // world rest orientations of both rigs
    let world_rest = |sk: &Skeleton| -> Vec<UnitQuaternion<f64>> {
        let mut out: Vec<UnitQuaternion<f64>> = Vec::with_capacity(sk.len());
        for j in sk.joints() {
            let q = match j.parent {
                None => j.rest_orientation,
                Some(p) => out[p] * j.rest_orientation,
            };
            out.push(q);
        }
        out
    };
    let src_rest = world_rest(&clip.skeleton);
    let tgt_rest = world_rest(target);

    // per-joint fixed discrepancy between the source and target joint frames
    let offsets: Vec<UnitQuaternion<f64>> = (0..target.len())
        .map(|ti| src_rest[src_of[ti]].inverse() * tgt_rest[ti])
        .collect();

    let src_leg = clip.skeleton.leg_chain_length();
    let tgt_leg = target.leg_chain_length();
    let scale = if src_leg > 0.0 { tgt_leg / src_leg } else { 1.0 };

    let frames = clip
        .frames
        .iter()
        .map(|frame| {
            (0..target.len())
                .map(|ti| {
                    let src_pose = &frame[src_of[ti]];
                    JointPose {
                        rotation: canonical(
                            offsets[ti].inverse() * src_pose.rotation * offsets[ti],
                        ),
                        translation: target.joints()[ti]
                            .parent
                            .is_none()
                            .then(|| src_pose.translation.unwrap_or_else(Vector3::zeros) * scale),
                    }
                })
                .collect()
        })
        .collect();

    MotionClip::new(target.clone(), clip.rate, frames)
}
