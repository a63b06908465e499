//! Robot skeleton description (JSON).
//!
//! ```json
//! {"name": "...",
//!  "joints": [{"name", "parent", "offset": [x,y,z], "axis": [x,y,z],
//!              "limits": {"pos": [lo,hi], "vel": [lo,hi]}}],
//!  "end_effectors": {"wrists": [...], "feet": [...], "head": [...]},
//!  "key_joints": [...], "neutral": {"joint": angle}}
//! ```
//!
//! Joints without `axis` are fixed links. Parents must be declared before
//! their children. `key_joints` and `neutral` are optional.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{KinematicsError, RobotError};
use crate::kinematics::{Quat, Vec3};
use crate::mocap::{Joint, MotionFrame, Skeleton};

const AXIS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    /// `[θ_min, θ_max]`, radians.
    pub position: (f64, f64),
    /// `[θ̇_min, θ̇_max]`, radians per second.
    pub velocity: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectorKind {
    Wrist,
    Foot,
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndEffector {
    pub joint: usize,
    pub kind: EffectorKind,
}

/// A skeleton whose movable joints are 1-DOF revolute joints with limits.
/// The joint vector θ is indexed by degree of freedom (`movable` order).
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSkeleton {
    pub name: String,
    pub skeleton: Skeleton,
    /// Skeleton joint index of each DOF.
    pub movable: Vec<usize>,
    /// DOF index of each skeleton joint, `None` for fixed links.
    pub dof_of_joint: Vec<Option<usize>>,
    axes: Vec<Vec3>,
    limits: Vec<JointLimits>,
    pub end_effectors: Vec<EndEffector>,
    pub key_joints: Option<Vec<String>>,
    /// Standing pose used to initialize the first IK frame.
    pub neutral: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    pos: [f64; 2],
    vel: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    parent: Option<String>,
    offset: [f64; 3],
    axis: Option<[f64; 3]>,
    limits: Option<RawLimits>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEffectors {
    #[serde(default)]
    wrists: Vec<String>,
    #[serde(default)]
    feet: Vec<String>,
    #[serde(default)]
    head: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    name: String,
    joints: Vec<RawJoint>,
    #[serde(default)]
    end_effectors: RawEffectors,
    key_joints: Option<Vec<String>>,
    #[serde(default)]
    neutral: BTreeMap<String, f64>,
}

pub fn parse_robot_skeleton(text: &str) -> Result<RobotSkeleton, RobotError> {
    let raw: RawRobot = serde_json::from_str(text).map_err(|e| RobotError::Json(e.to_string()))?;
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    let mut joints = Vec::with_capacity(raw.joints.len());
    let mut axes = Vec::new();
    let mut limits = Vec::new();
    let mut movable = Vec::new();
    let mut dof_of_joint = Vec::with_capacity(raw.joints.len());

    let roots = raw.joints.iter().filter(|j| j.parent.is_none()).count();
    if roots != 1 {
        return Err(RobotError::RootCount(roots));
    }

    for (i, rj) in raw.joints.iter().enumerate() {
        if names.insert(rj.name.as_str(), i).is_some() {
            return Err(RobotError::DuplicateJoint(rj.name.clone()));
        }
        let parent =
            match &rj.parent {
                None => None,
                Some(p) => Some(*names.get(p.as_str()).filter(|&&pi| pi != i).ok_or_else(
                    || RobotError::UnknownParent {
                        joint: rj.name.clone(),
                        parent: p.clone(),
                    },
                )?),
            };
        if parent.is_none() && i != 0 {
            return Err(RobotError::Json(format!(
                "root joint '{}' must be declared first",
                rj.name
            )));
        }
        let offset = Vec3::from(rj.offset);
        if !offset.iter().all(|v| v.is_finite()) {
            return Err(RobotError::NonFinite {
                joint: rj.name.clone(),
                field: "offset",
            });
        }
        joints.push(Joint::new(&rj.name, parent, offset));

        match (&rj.axis, &rj.limits) {
            (None, None) => dof_of_joint.push(None),
            (None, Some(_)) => {
                return Err(RobotError::LimitsWithoutAxis {
                    joint: rj.name.clone(),
                })
            }
            (Some(axis), lim) => {
                let axis = Vec3::from(*axis);
                if !axis.iter().all(|v| v.is_finite()) {
                    return Err(RobotError::NonFinite {
                        joint: rj.name.clone(),
                        field: "axis",
                    });
                }
                let norm = axis.norm();
                if (norm - 1.0).abs() > AXIS_TOLERANCE {
                    return Err(RobotError::NonUnitAxis {
                        joint: rj.name.clone(),
                        norm,
                    });
                }
                let limit = match lim {
                    Some(l) => {
                        if !l.pos.iter().chain(&l.vel).all(|v| v.is_finite()) {
                            return Err(RobotError::NonFinite {
                                joint: rj.name.clone(),
                                field: "limits",
                            });
                        }
                        if l.pos[0] > l.pos[1] {
                            return Err(RobotError::LimitInversion {
                                joint: rj.name.clone(),
                                which: "position",
                                lo: l.pos[0],
                                hi: l.pos[1],
                            });
                        }
                        if l.vel[0] > l.vel[1] {
                            return Err(RobotError::LimitInversion {
                                joint: rj.name.clone(),
                                which: "velocity",
                                lo: l.vel[0],
                                hi: l.vel[1],
                            });
                        }
                        if l.vel[0] > 0.0 || l.vel[1] < 0.0 {
                            return Err(RobotError::VelocityBracket {
                                joint: rj.name.clone(),
                                lo: l.vel[0],
                                hi: l.vel[1],
                            });
                        }
                        JointLimits {
                            position: (l.pos[0], l.pos[1]),
                            velocity: (l.vel[0], l.vel[1]),
                        }
                    }
                    None => JointLimits {
                        position: (-std::f64::consts::PI, std::f64::consts::PI),
                        velocity: (f64::NEG_INFINITY, f64::INFINITY),
                    },
                };
                dof_of_joint.push(Some(movable.len()));
                movable.push(i);
                axes.push(axis / norm);
                limits.push(limit);
            }
        }
    }

    let skeleton = Skeleton::new(joints).map_err(|e| RobotError::Json(e.to_string()))?;
    let lookup = |name: &String| {
        skeleton
            .index_of(name)
            .ok_or_else(|| RobotError::UnknownJoint(name.clone()))
    };

    let mut end_effectors = Vec::new();
    for (list, kind) in [
        (&raw.end_effectors.wrists, EffectorKind::Wrist),
        (&raw.end_effectors.feet, EffectorKind::Foot),
        (&raw.end_effectors.head, EffectorKind::Head),
    ] {
        for name in list {
            end_effectors.push(EndEffector {
                joint: lookup(name)?,
                kind,
            });
        }
    }
    if let Some(keys) = &raw.key_joints {
        for k in keys {
            lookup(k)?;
        }
    }

    let mut neutral = vec![0.0; movable.len()];
    for (name, angle) in &raw.neutral {
        let j = lookup(name)?;
        let dof = dof_of_joint[j].ok_or_else(|| {
            RobotError::Json(format!("neutral angle given for fixed joint '{name}'"))
        })?;
        neutral[dof] = *angle;
    }
    for (dof, value) in neutral.iter_mut().enumerate() {
        let (lo, hi) = limits[dof].position;
        *value = value.clamp(lo, hi);
    }

    Ok(RobotSkeleton {
        name: raw.name,
        skeleton,
        movable,
        dof_of_joint,
        axes,
        limits,
        end_effectors,
        key_joints: raw.key_joints,
        neutral,
    })
}

impl RobotSkeleton {
    /// Number of movable joints.
    pub fn dof(&self) -> usize {
        self.movable.len()
    }

    /// Joint-frame rotation axis of a DOF.
    pub fn axis(&self, dof: usize) -> Vec3 {
        self.axes[dof]
    }

    pub fn limits(&self, dof: usize) -> &JointLimits {
        &self.limits[dof]
    }

    pub fn dof_names(&self) -> Vec<String> {
        self.movable
            .iter()
            .map(|&j| self.skeleton.joints[j].name.clone())
            .collect()
    }

    /// Per-joint local rotations for joint vector `theta`.
    pub fn local_rotations(&self, theta: &[f64]) -> Result<Vec<Quat>, KinematicsError> {
        if theta.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                actual: theta.len(),
            });
        }
        Ok(self
            .dof_of_joint
            .iter()
            .map(|d| match d {
                Some(dof) => Quat::from_scaled_axis(self.axes[*dof] * theta[*dof]),
                None => Quat::identity(),
            })
            .collect())
    }

    /// The frame a mocap reader would produce for this robot posed at
    /// `theta` with the given root pose; lets the robot act as its own source.
    pub fn motion_frame(
        &self,
        root_position: Vec3,
        root_orientation: Quat,
        theta: &[f64],
    ) -> Result<MotionFrame, KinematicsError> {
        let mut local_rotations = self.local_rotations(theta)?;
        local_rotations[self.skeleton.root_index] = Quat::identity();
        Ok(MotionFrame {
            root_position,
            root_orientation,
            local_rotations,
        })
    }

    pub fn within_limits(&self, theta: &[f64]) -> bool {
        theta.len() == self.dof()
            && theta
                .iter()
                .zip(&self.limits)
                .all(|(t, l)| *t >= l.position.0 && *t <= l.position.1)
    }

    /// Effectors of one kind, in declaration order.
    pub fn effectors(&self, kind: EffectorKind) -> impl Iterator<Item = &EndEffector> {
        self.end_effectors.iter().filter(move |e| e.kind == kind)
    }

    /// Copy with all rest offsets multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RobotSkeleton {
        RobotSkeleton {
            skeleton: self.skeleton.scaled(factor),
            ..self.clone()
        }
    }
}
