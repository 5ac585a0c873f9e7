//! BVH subset parser.
//!
//! Supported grammar: HIERARCHY with ROOT/JOINT/End Site blocks carrying
//! OFFSET and CHANNELS (3 rotations, or 6 position+rotation channels on the
//! root), then MOTION with a frame count, a frame time and one
//! whitespace-separated value row per frame. Rotation channels may appear
//! in any of the six Euler orders; they are applied in declared order.
//! End Sites are parsed and discarded (they carry no animation channels).

use super::{canonical, JointDef, JointPose, MocapError, MotionClip, Skeleton};
use nalgebra::{UnitQuaternion, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Xpos,
    Ypos,
    Zpos,
    Xrot,
    Yrot,
    Zrot,
}

impl Channel {
    fn parse(token: &str) -> Option<Channel> {
        match token {
            "Xposition" => Some(Channel::Xpos),
            "Yposition" => Some(Channel::Ypos),
            "Zposition" => Some(Channel::Zpos),
            "Xrotation" => Some(Channel::Xrot),
            "Yrotation" => Some(Channel::Yrot),
            "Zrotation" => Some(Channel::Zrot),
            _ => None,
        }
    }

    fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrot | Channel::Yrot | Channel::Zrot)
    }

    fn axis(self) -> Vector3<f64> {
        match self {
            Channel::Xpos | Channel::Xrot => Vector3::x(),
            Channel::Ypos | Channel::Yrot => Vector3::y(),
            Channel::Zpos | Channel::Zrot => Vector3::z(),
        }
    }
}

struct ParsedJoint {
    def: JointDef,
    channels: Vec<Channel>,
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    /// 1-based number of the last line handed out.
    pub current: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { iter: text.lines().enumerate(), current: 0 }
    }

    /// Next non-blank line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            self.current = i + 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Some((i + 1, trimmed));
            }
        }
        None
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64, MocapError> {
    token
        .parse::<f64>()
        .map_err(|_| MocapError::MalformedNumber { token: token.to_string(), line })
}

pub fn parse_bvh(text: &str) -> Result<MotionClip, MocapError> {
    let mut lines = Lines::new(text);

    // HIERARCHY
    match lines.next() {
        Some((_, l)) if l == "HIERARCHY" => {}
        other => {
            return Err(MocapError::MissingSection {
                section: "HIERARCHY".into(),
                line: other.map(|(n, _)| n).unwrap_or(1),
            })
        }
    }

    let mut joints: Vec<ParsedJoint> = Vec::new();
    // stack of joint indices for the open blocks; None marks an End Site block
    let mut stack: Vec<Option<usize>> = Vec::new();
    let mut expect_open = false;

    let motion_line = loop {
        let (line_no, line) = lines.next().ok_or(MocapError::MissingSection {
            section: "MOTION".into(),
            line: lines.current.max(1),
        })?;
        if expect_open {
            if line != "{" {
                return Err(MocapError::MissingSection {
                    section: format!("'{{' after joint declaration, got '{line}'"),
                    line: line_no,
                });
            }
            expect_open = false;
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap();
        match head {
            "ROOT" | "JOINT" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                if name.is_empty() {
                    return Err(MocapError::MissingSection {
                        section: "joint name".into(),
                        line: line_no,
                    });
                }
                let parent = stack.iter().rev().find_map(|s| *s);
                if head == "ROOT" && parent.is_some() {
                    return Err(MocapError::MissingSection {
                        section: "ROOT must be top-level".into(),
                        line: line_no,
                    });
                }
                joints.push(ParsedJoint {
                    def: JointDef {
                        name,
                        parent,
                        rest_offset: Vector3::zeros(),
                        rest_orientation: UnitQuaternion::identity(),
                    },
                    channels: Vec::new(),
                });
                stack.push(Some(joints.len() - 1));
                expect_open = true;
            }
            "End" => {
                // "End Site"
                stack.push(None);
                expect_open = true;
            }
            "OFFSET" => {
                let vals: Vec<&str> = tokens.collect();
                if vals.len() != 3 {
                    return Err(MocapError::MalformedNumber {
                        token: line.to_string(),
                        line: line_no,
                    });
                }
                let v = Vector3::new(
                    parse_f64(vals[0], line_no)?,
                    parse_f64(vals[1], line_no)?,
                    parse_f64(vals[2], line_no)?,
                );
                if let Some(Some(ji)) = stack.last() {
                    joints[*ji].def.rest_offset = v;
                }
                // End Site offsets are discarded
            }
            "CHANNELS" => {
                let ji = match stack.last() {
                    Some(Some(ji)) => *ji,
                    _ => {
                        return Err(MocapError::UnsupportedChannelOrder {
                            detail: "CHANNELS inside End Site".into(),
                            line: line_no,
                        })
                    }
                };
                let count_tok = tokens.next().ok_or(MocapError::MalformedNumber {
                    token: line.to_string(),
                    line: line_no,
                })?;
                let count: usize = count_tok.parse().map_err(|_| MocapError::MalformedNumber {
                    token: count_tok.to_string(),
                    line: line_no,
                })?;
                let chans: Vec<Channel> = tokens
                    .map(|t| {
                        Channel::parse(t).ok_or(MocapError::UnsupportedChannelOrder {
                            detail: format!("unknown channel '{t}'"),
                            line: line_no,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if chans.len() != count {
                    return Err(MocapError::UnsupportedChannelOrder {
                        detail: format!("declared {count} channels, listed {}", chans.len()),
                        line: line_no,
                    });
                }
                validate_channels(&chans, joints[ji].def.parent.is_none(), line_no)?;
                joints[ji].channels = chans;
            }
            "{" => {
                return Err(MocapError::MissingSection {
                    section: "unexpected '{'".into(),
                    line: line_no,
                })
            }
            "}" => {
                if stack.pop().is_none() {
                    return Err(MocapError::MissingSection {
                        section: "unbalanced '}'".into(),
                        line: line_no,
                    });
                }
            }
            "MOTION" => {
                if !stack.is_empty() {
                    return Err(MocapError::MissingSection {
                        section: "unbalanced hierarchy before MOTION".into(),
                        line: line_no,
                    });
                }
                break line_no;
            }
            other => {
                return Err(MocapError::MissingSection {
                    section: format!("unexpected token '{other}'"),
                    line: line_no,
                })
            }
        }
    };

    if joints.is_empty() {
        return Err(MocapError::MissingSection { section: "ROOT".into(), line: motion_line });
    }

    // MOTION header
    let (fl, frames_line) = lines.next().ok_or(MocapError::MissingSection {
        section: "Frames:".into(),
        line: lines.current,
    })?;
    let frame_count: usize = match frames_line.strip_prefix("Frames:") {
        Some(rest) => rest.trim().parse().map_err(|_| MocapError::MalformedNumber {
            token: rest.trim().to_string(),
            line: fl,
        })?,
        None => return Err(MocapError::MissingSection { section: "Frames:".into(), line: fl }),
    };
    let (tl, time_line) = lines.next().ok_or(MocapError::MissingSection {
        section: "Frame Time:".into(),
        line: lines.current,
    })?;
    let frame_time: f64 = match time_line.strip_prefix("Frame Time:") {
        Some(rest) => parse_f64(rest.trim(), tl)?,
        None => {
            return Err(MocapError::MissingSection { section: "Frame Time:".into(), line: tl })
        }
    };
    if !(frame_time > 0.0) {
        return Err(MocapError::MalformedNumber {
            token: frame_time.to_string(),
            line: tl,
        });
    }

    let total_channels: usize = joints.iter().map(|j| j.channels.len()).sum();
    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let (line_no, row) = lines.next().ok_or(MocapError::ChannelMismatch {
            expected: total_channels,
            got: 0,
            line: lines.current + 1,
        })?;
        let values: Vec<f64> = row
            .split_whitespace()
            .map(|t| parse_f64(t, line_no))
            .collect::<Result<_, _>>()?;
        if values.len() != total_channels {
            return Err(MocapError::ChannelMismatch {
                expected: total_channels,
                got: values.len(),
                line: line_no,
            });
        }
        let mut frame = Vec::with_capacity(joints.len());
        let mut cursor = 0usize;
        for j in &joints {
            let mut translation = Vector3::zeros();
            let mut rotation = UnitQuaternion::identity();
            for &ch in &j.channels {
                let v = values[cursor];
                cursor += 1;
                if ch.is_rotation() {
                    rotation *= UnitQuaternion::from_axis_angle(
                        &nalgebra::Unit::new_unchecked(ch.axis()),
                        v.to_radians(),
                    );
                } else {
                    translation += ch.axis() * v;
                }
            }
            frame.push(JointPose {
                rotation: canonical(rotation),
                translation: j.def.parent.is_none().then_some(translation),
            });
        }
        frames.push(frame);
    }

    let skeleton = Skeleton::new(joints.into_iter().map(|j| j.def).collect())?;
    MotionClip::new(skeleton, 1.0 / frame_time, frames)
}

fn validate_channels(chans: &[Channel], is_root: bool, line: usize) -> Result<(), MocapError> {
    let n_pos = chans.iter().filter(|c| !c.is_rotation()).count();
    let n_rot = chans.len() - n_pos;
    let ok = if is_root {
        (n_pos == 0 && n_rot == 3) || (n_pos == 3 && n_rot == 3)
    } else {
        n_pos == 0 && n_rot == 3
    };
    if !ok {
        return Err(MocapError::UnsupportedChannelOrder {
            detail: format!(
                "{n_pos} position + {n_rot} rotation channels not supported here"
            ),
            line,
        });
    }
    // no duplicate axes within the rotation or position groups
    for group in [true, false] {
        let mut seen = Vec::new();
        for &c in chans.iter().filter(|c| c.is_rotation() == group) {
            if seen.contains(&c.axis()) {
                return Err(MocapError::UnsupportedChannelOrder {
                    detail: "duplicate channel axis".into(),
                    line,
                });
            }
            seen.push(c.axis());
        }
    }
    Ok(())
}
