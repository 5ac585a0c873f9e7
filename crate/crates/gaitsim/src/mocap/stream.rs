//! Flat joint-stream CSV format.
//!
//! Leading comment lines define the skeleton sidecar and rate:
//!
//! ```text
//! #rate 200
//! #joint hips - 0 900 0
//! #joint l_hip hips 100 0 0 [qw qx qy qz]
//! ```
//!
//! The optional trailing quaternion is the joint's rest orientation
//! (identity when absent). Data rows follow the header
//! `frame,joint,px,py,pz,qw,qx,qy,qz`, grouped by frame. World positions
//! are retained only for the root; other joints' positions are recomputed
//! by forward kinematics downstream.

use super::{canonical, JointDef, JointPose, MocapError, MotionClip, Skeleton};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};

const HEADER: &str = "frame,joint,px,py,pz,qw,qx,qy,qz";

fn parse_f64(token: &str, line: usize) -> Result<f64, MocapError> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| MocapError::MalformedNumber { token: token.trim().to_string(), line })
}

pub fn parse_joint_csv(text: &str) -> Result<MotionClip, MocapError> {
    let mut rate: Option<f64> = None;
    let mut joints: Vec<JointDef> = Vec::new();
    let mut header_seen = false;
    // per-frame, per-joint poses in appearance order
    let mut frames: Vec<Vec<Option<JointPose>>> = Vec::new();
    let mut frame_keys: Vec<u64> = Vec::new();
    // line where each frame group started, for MissingJointRow diagnostics
    let mut frame_lines: Vec<usize> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            match tokens.first() {
                Some(&"rate") if tokens.len() == 2 => {
                    rate = Some(parse_f64(tokens[1], line_no)?);
                }
                Some(&"joint") if tokens.len() == 6 || tokens.len() == 10 => {
                    let name = tokens[1].to_string();
                    let parent = match tokens[2] {
                        "-" | "none" => None,
                        p => Some(joints.iter().position(|j| j.name == p).ok_or(
                            MocapError::UnknownJointName { name: p.to_string(), line: line_no },
                        )?),
                    };
                    let rest_offset = Vector3::new(
                        parse_f64(tokens[3], line_no)?,
                        parse_f64(tokens[4], line_no)?,
                        parse_f64(tokens[5], line_no)?,
                    );
                    let rest_orientation = if tokens.len() == 10 {
                        read_quaternion(
                            parse_f64(tokens[6], line_no)?,
                            parse_f64(tokens[7], line_no)?,
                            parse_f64(tokens[8], line_no)?,
                            parse_f64(tokens[9], line_no)?,
                            line_no,
                        )?
                    } else {
                        UnitQuaternion::identity()
                    };
                    joints.push(JointDef { name, parent, rest_offset, rest_orientation });
                }
                _ => {
                    return Err(MocapError::MissingSection {
                        section: format!("unrecognized sidecar line '#{rest}'"),
                        line: line_no,
                    })
                }
            }
            continue;
        }
        if !header_seen {
            if line != HEADER {
                return Err(MocapError::MissingSection {
                    section: format!("header '{HEADER}'"),
                    line: line_no,
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(MocapError::MissingSection {
                section: format!("9-field data row, got {} fields", fields.len()),
                line: line_no,
            });
        }
        let frame_key: u64 = fields[0].trim().parse().map_err(|_| MocapError::MalformedNumber {
            token: fields[0].trim().to_string(),
            line: line_no,
        })?;
        let joint_name = fields[1].trim();
        let ji = joints
            .iter()
            .position(|j| j.name == joint_name)
            .ok_or(MocapError::UnknownJointName { name: joint_name.to_string(), line: line_no })?;
        let px = parse_f64(fields[2], line_no)?;
        let py = parse_f64(fields[3], line_no)?;
        let pz = parse_f64(fields[4], line_no)?;
        let rotation = read_quaternion(
            parse_f64(fields[5], line_no)?,
            parse_f64(fields[6], line_no)?,
            parse_f64(fields[7], line_no)?,
            parse_f64(fields[8], line_no)?,
            line_no,
        )?;
        if frame_keys.last() != Some(&frame_key) {
            // close out the previous frame before opening a new group
            if let Some(prev) = frames.last() {
                check_complete(prev, &joints, *frame_keys.last().unwrap(), line_no)?;
            }
            frame_keys.push(frame_key);
            frame_lines.push(line_no);
            frames.push(vec![None; joints.len()]);
        }
        let is_root = joints[ji].parent.is_none();
        frames.last_mut().unwrap()[ji] = Some(JointPose {
            rotation: canonical(rotation),
            translation: is_root.then_some(Vector3::new(px, py, pz)),
        });
    }

    if joints.is_empty() {
        return Err(MocapError::MissingSection { section: "#joint sidecar".into(), line: 1 });
    }
    if frames.is_empty() {
        return Err(MocapError::EmptyClip);
    }
    let last_line = text.lines().count();
    check_complete(frames.last().unwrap(), &joints, *frame_keys.last().unwrap(), last_line)?;

    let complete: Vec<Vec<JointPose>> = frames
        .into_iter()
        .map(|f| f.into_iter().map(Option::unwrap).collect())
        .collect();
    let skeleton = Skeleton::new(joints)?;
    MotionClip::new(skeleton, rate.unwrap_or(200.0), complete)
}

fn check_complete(
    frame: &[Option<JointPose>],
    joints: &[JointDef],
    frame_key: u64,
    line: usize,
) -> Result<(), MocapError> {
    for (ji, pose) in frame.iter().enumerate() {
        if pose.is_none() {
            return Err(MocapError::MissingJointRow {
                frame: frame_key as usize,
                joint: joints[ji].name.clone(),
                line,
            });
        }
    }
    Ok(())
}

fn read_quaternion(
    w: f64,
    x: f64,
    y: f64,
    z: f64,
    line: usize,
) -> Result<UnitQuaternion<f64>, MocapError> {
    let q = Quaternion::new(w, x, y, z);
    let norm = q.norm();
    let dev = (norm - 1.0).abs();
    if dev > 1e-3 {
        return Err(MocapError::NonUnitQuaternion { norm, line });
    }
    // keep already-unit quaternions bit-exact so round trips are exact
    if dev <= 1e-12 {
        Ok(UnitQuaternion::new_unchecked(q))
    } else {
        Ok(UnitQuaternion::new_unchecked(q / norm))
    }
}

/// Serialize a clip to the joint-stream CSV format. Floats are written in
/// shortest round-trip form, so `parse_joint_csv(serialize_joint_csv(c))`
/// reproduces `c` field-by-field.
pub fn serialize_joint_csv(clip: &MotionClip) -> String {
    let mut out = String::new();
    out.push_str(&format!("#rate {}\n", clip.rate));
    for j in clip.skeleton.joints() {
        let parent = match j.parent {
            None => "-".to_string(),
            Some(p) => clip.skeleton.joints()[p].name.clone(),
        };
        let o = j.rest_offset;
        if j.rest_orientation == UnitQuaternion::identity() {
            out.push_str(&format!("#joint {} {} {} {} {}\n", j.name, parent, o.x, o.y, o.z));
        } else {
            let q = j.rest_orientation.coords;
            out.push_str(&format!(
                "#joint {} {} {} {} {} {} {} {} {}\n",
                j.name, parent, o.x, o.y, o.z, q.w, q.x, q.y, q.z
            ));
        }
    }
    out.push_str(HEADER);
    out.push('\n');
    for (fi, frame) in clip.frames.iter().enumerate() {
        for (ji, pose) in frame.iter().enumerate() {
            let p = pose.translation.unwrap_or_else(Vector3::zeros);
            let q = pose.rotation.coords;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fi,
                clip.skeleton.joints()[ji].name,
                p.x,
                p.y,
                p.z,
                q.w,
                q.x,
                q.y,
                q.z
            ));
        }
    }
    out
}
