//! BVH reader and writer.
//!
//! Rotation channels are intrinsic rotations composed in declared order, so
//! `Zrotation Xrotation Yrotation` yields `Rz · Rx · Ry`. Translation channels
//! are honored on the root only; the root's world position is its OFFSET plus
//! the translation channel values. All lengths are multiplied by
//! [`BvhOptions::scale`].

use std::fmt::Write as _;

use crate::error::{BvhError, BvhErrorKind};
use crate::kinematics::{Axis, Quat, Vec3};
use crate::mocap::{Joint, MotionFrame, MotionSequence, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhOptions {
    /// File units to meters. CMU-style exports are centimeters.
    pub scale: f64,
}

impl Default for BvhOptions {
    fn default() -> Self {
        Self { scale: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Channel {
    Position(Axis),
    Rotation(Axis),
}

impl Channel {
    fn parse(token: &str) -> Option<Channel> {
        Some(match token {
            "Xposition" => Channel::Position(Axis::X),
            "Yposition" => Channel::Position(Axis::Y),
            "Zposition" => Channel::Position(Axis::Z),
            "Xrotation" => Channel::Rotation(Axis::X),
            "Yrotation" => Channel::Rotation(Axis::Y),
            "Zrotation" => Channel::Rotation(Axis::Z),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for word in line.split_whitespace() {
            // braces are sometimes glued to names
            let mut rest = word;
            while !rest.is_empty() {
                match rest.find(['{', '}']) {
                    Some(0) => {
                        tokens.push(Token {
                            text: &rest[..1],
                            line: i + 1,
                        });
                        rest = &rest[1..];
                    }
                    Some(k) => {
                        tokens.push(Token {
                            text: &rest[..k],
                            line: i + 1,
                        });
                        rest = &rest[k..];
                    }
                    None => {
                        tokens.push(Token {
                            text: rest,
                            line: i + 1,
                        });
                        rest = "";
                    }
                }
            }
        }
    }
    tokens
}

struct RawJoint {
    name: String,
    parent: Option<usize>,
    offset: Vec3,
    channels: Vec<Channel>,
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
    joints: Vec<RawJoint>,
}

impl<'a> Parser<'a> {
    fn err(line: usize, kind: BvhErrorKind) -> BvhError {
        BvhError { line, kind }
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self, expected: &str) -> Result<Token<'a>, BvhError> {
        let tok = self.tokens.get(self.pos).copied().ok_or_else(|| {
            Self::err(
                self.last_line,
                BvhErrorKind::UnexpectedEof(expected.to_string()),
            )
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, word: &str) -> Result<Token<'a>, BvhError> {
        let tok = self.next(&format!("'{word}'"))?;
        if tok.text != word {
            return Err(Self::err(
                tok.line,
                BvhErrorKind::UnexpectedToken {
                    found: tok.text.to_string(),
                    expected: format!("'{word}'"),
                },
            ));
        }
        Ok(tok)
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let tok = self.next("a number")?;
        parse_number(tok)
    }

    fn offset(&mut self) -> Result<Vec3, BvhError> {
        self.expect("OFFSET")?;
        Ok(Vec3::new(self.number()?, self.number()?, self.number()?))
    }

    fn joint(&mut self, name: &str, parent: Option<usize>) -> Result<(), BvhError> {
        let open = self.expect("{")?;
        if self.joints.iter().any(|j| j.name == name) {
            return Err(Self::err(
                open.line,
                BvhErrorKind::DuplicateJoint(name.to_string()),
            ));
        }
        let offset = self.offset()?;
        let mut channels = Vec::new();
        if self.peek().map(|t| t.text) == Some("CHANNELS") {
            self.pos += 1;
            let count_tok = self.next("channel count")?;
            let count: usize = count_tok.text.parse().map_err(|_| {
                Self::err(
                    count_tok.line,
                    BvhErrorKind::InvalidNumber(count_tok.text.to_string()),
                )
            })?;
            for _ in 0..count {
                let tok = self.next("a channel name")?;
                let ch = Channel::parse(tok.text).ok_or_else(|| {
                    Self::err(
                        tok.line,
                        BvhErrorKind::UnsupportedChannel(tok.text.to_string()),
                    )
                })?;
                channels.push(ch);
            }
        }
        let index = self.joints.len();
        self.joints.push(RawJoint {
            name: name.to_string(),
            parent,
            offset,
            channels,
        });
        loop {
            let tok = self.next("JOINT, End Site or '}'")?;
            match tok.text {
                "JOINT" => {
                    let child = self.next("a joint name")?;
                    self.joint(child.text, Some(index))?;
                }
                "End" => {
                    self.expect("Site")?;
                    self.expect("{")?;
                    let offset = self.offset()?;
                    self.expect("}")?;
                    self.joints.push(RawJoint {
                        name: format!("{name}_end"),
                        parent: Some(index),
                        offset,
                        channels: Vec::new(),
                    });
                }
                "}" => return Ok(()),
                other => {
                    return Err(Self::err(
                        tok.line,
                        BvhErrorKind::UnexpectedToken {
                            found: other.to_string(),
                            expected: "JOINT, End Site or '}'".into(),
                        },
                    ))
                }
            }
        }
    }
}

fn parse_number(tok: Token<'_>) -> Result<f64, BvhError> {
    let v: f64 = tok.text.parse().map_err(|_| BvhError {
        line: tok.line,
        kind: BvhErrorKind::InvalidNumber(tok.text.to_string()),
    })?;
    if !v.is_finite() {
        return Err(BvhError {
            line: tok.line,
            kind: BvhErrorKind::NonFinite(tok.text.to_string()),
        });
    }
    Ok(v)
}

/// Parse with the default centimeter-to-meter scale.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, MotionSequence), BvhError> {
    parse_bvh_with(text, &BvhOptions::default())
}

pub fn parse_bvh_with(
    text: &str,
    opts: &BvhOptions,
) -> Result<(Skeleton, MotionSequence), BvhError> {
    let tokens = tokenize(text);
    let last_line = text.lines().count().max(1);
    let mut p = Parser {
        tokens,
        pos: 0,
        last_line,
        joints: Vec::new(),
    };

    match p.peek() {
        Some(t) if t.text == "HIERARCHY" => p.pos += 1,
        Some(t) => {
            return Err(Parser::err(
                t.line,
                BvhErrorKind::MissingSection("HIERARCHY"),
            ))
        }
        None => return Err(Parser::err(1, BvhErrorKind::MissingSection("HIERARCHY"))),
    }
    p.expect("ROOT")?;
    let root_name = p.next("a root name")?;
    p.joint(root_name.text, None)?;

    match p.peek() {
        Some(t) if t.text == "MOTION" => p.pos += 1,
        Some(t) => {
            return Err(Parser::err(
                t.line,
                BvhErrorKind::UnexpectedToken {
                    found: t.text.to_string(),
                    expected: "'MOTION'".into(),
                },
            ))
        }
        None => {
            return Err(Parser::err(
                last_line,
                BvhErrorKind::MissingSection("MOTION"),
            ))
        }
    }
    let frames_tok = p.expect("Frames:")?;
    let count_tok = p.next("frame count")?;
    let declared: usize = count_tok.text.parse().map_err(|_| {
        Parser::err(
            count_tok.line,
            BvhErrorKind::InvalidNumber(count_tok.text.to_string()),
        )
    })?;
    p.expect("Frame")?;
    let time_tok = p.expect("Time:")?;
    let frame_time = p.number()?;
    if frame_time <= 0.0 {
        return Err(Parser::err(
            time_tok.line,
            BvhErrorKind::InvalidFrameTime(frame_time),
        ));
    }

    let n_channels: usize = p.joints.iter().map(|j| j.channels.len()).sum();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(declared);
    let rest = &p.tokens[p.pos..];
    let mut i = 0;
    while i < rest.len() {
        let line = rest[i].line;
        let mut values = Vec::with_capacity(n_channels);
        while i < rest.len() && rest[i].line == line {
            values.push(parse_number(rest[i])?);
            i += 1;
        }
        if values.len() != n_channels {
            return Err(Parser::err(
                line,
                BvhErrorKind::ChannelCountMismatch {
                    expected: n_channels,
                    found: values.len(),
                },
            ));
        }
        rows.push((line, values));
    }
    if rows.len() != declared {
        let line = rows.last().map_or(frames_tok.line, |r| r.0);
        return Err(Parser::err(
            line,
            BvhErrorKind::FrameCountMismatch {
                declared,
                found: rows.len(),
            },
        ));
    }

    let scale = opts.scale;
    let joints: Vec<Joint> = p
        .joints
        .iter()
        .map(|j| Joint {
            name: j.name.clone(),
            parent: j.parent,
            rest_offset: j.offset * scale,
            channel_order: j
                .channels
                .iter()
                .filter_map(|c| match c {
                    Channel::Rotation(a) => Some(*a),
                    Channel::Position(_) => None,
                })
                .collect(),
        })
        .collect();
    let skeleton = Skeleton::new(joints).map_err(|e| {
        Parser::err(
            1,
            BvhErrorKind::UnexpectedEof(format!("valid skeleton ({e})")),
        )
    })?;

    let root_offset = p.joints[0].offset;
    let frames = rows
        .iter()
        .map(|(_, values)| {
            let mut cursor = 0;
            let mut root_position = root_offset;
            let mut root_orientation = Quat::identity();
            let mut local_rotations = Vec::with_capacity(p.joints.len());
            for (ji, joint) in p.joints.iter().enumerate() {
                let mut q = Quat::identity();
                for ch in &joint.channels {
                    let v = values[cursor];
                    cursor += 1;
                    match ch {
                        Channel::Rotation(a) => q *= a.rotation(v.to_radians()),
                        Channel::Position(a) if ji == 0 => root_position[*a as usize] += v,
                        Channel::Position(_) => {}
                    }
                }
                if ji == 0 {
                    root_orientation = q;
                    local_rotations.push(Quat::identity());
                } else {
                    local_rotations.push(q);
                }
            }
            MotionFrame {
                root_position: root_position * scale,
                root_orientation,
                local_rotations,
            }
        })
        .collect();

    Ok((skeleton, MotionSequence { frame_time, frames }))
}

/// `(z, x, y)` angles with `q = Rz(z) · Rx(x) · Ry(y)`.
fn euler_zxy(q: &Quat) -> (f64, f64, f64) {
    let r = q.to_rotation_matrix();
    let m = r.matrix();
    let x = m[(2, 1)].clamp(-1.0, 1.0).asin();
    let y = (-m[(2, 0)]).atan2(m[(2, 2)]);
    let z = (-m[(0, 1)]).atan2(m[(1, 1)]);
    (z, x, y)
}

/// Serialize a skeleton and motion as BVH. Every joint gets
/// `Zrotation Xrotation Yrotation` channels (the root also gets positions),
/// except childless channel-less joints named `<parent>_end`, which are
/// written as End Sites. Lengths are divided by `scale`.
pub fn write_bvh(skeleton: &Skeleton, motion: &MotionSequence, scale: f64) -> String {
    let n = skeleton.len();
    let mut children = vec![Vec::new(); n];
    for (i, j) in skeleton.joints.iter().enumerate() {
        if let Some(p) = j.parent {
            children[p].push(i);
        }
    }
    let is_end_site = |i: usize| {
        let j = &skeleton.joints[i];
        children[i].is_empty()
            && j.channel_order.is_empty()
            && j.parent
                .is_some_and(|p| j.name == format!("{}_end", skeleton.joints[p].name))
    };

    let mut out = String::from("HIERARCHY\n");
    let mut order = Vec::with_capacity(n);
    #[allow(clippy::too_many_arguments)]
    fn emit(
        out: &mut String,
        order: &mut Vec<usize>,
        skeleton: &Skeleton,
        children: &[Vec<usize>],
        is_end_site: &dyn Fn(usize) -> bool,
        j: usize,
        depth: usize,
        scale: f64,
    ) {
        let pad = "  ".repeat(depth);
        let joint = &skeleton.joints[j];
        let o = joint.rest_offset / scale;
        if is_end_site(j) {
            let _ = writeln!(
                out,
                "{pad}End Site\n{pad}{{\n{pad}  OFFSET {:.9} {:.9} {:.9}\n{pad}}}",
                o.x, o.y, o.z
            );
            return;
        }
        order.push(j);
        let keyword = if joint.parent.is_none() {
            "ROOT"
        } else {
            "JOINT"
        };
        let _ = writeln!(out, "{pad}{keyword} {}\n{pad}{{", joint.name);
        let _ = writeln!(out, "{pad}  OFFSET {:.9} {:.9} {:.9}", o.x, o.y, o.z);
        if joint.parent.is_none() {
            let _ = writeln!(
                out,
                "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation"
            );
        } else {
            let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Xrotation Yrotation");
        }
        for &c in &children[j] {
            emit(
                out,
                order,
                skeleton,
                children,
                is_end_site,
                c,
                depth + 1,
                scale,
            );
        }
        let _ = writeln!(out, "{pad}}}");
    }
    emit(
        &mut out,
        &mut order,
        skeleton,
        &children,
        &is_end_site,
        skeleton.root_index,
        0,
        scale,
    );

    let _ = writeln!(
        out,
        "MOTION\nFrames: {}\nFrame Time: {:.9}",
        motion.frames.len(),
        motion.frame_time
    );
    let root_offset = skeleton.joints[skeleton.root_index].rest_offset;
    for frame in &motion.frames {
        let mut fields: Vec<String> = Vec::with_capacity(order.len() * 3 + 3);
        for &j in &order {
            let q = if j == skeleton.root_index {
                let p = (frame.root_position - root_offset) / scale;
                fields.extend([p.x, p.y, p.z].iter().map(|v| format!("{v:.9}")));
                frame.root_orientation
            } else {
                frame.local_rotations[j]
            };
            let (z, x, y) = euler_zxy(&q);
            fields.extend([z, x, y].iter().map(|v| format!("{:.9}", v.to_degrees())));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}
