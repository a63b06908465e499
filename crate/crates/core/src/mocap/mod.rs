//! Canonical skeleton and motion types plus the readers/writers that produce
//! them: BVH for human captures, a JSON robot description, and the motion CSV.

mod bvh;
mod motion_csv;
mod robot;

pub use bvh::{parse_bvh, parse_bvh_with, write_bvh, BvhOptions};
pub use motion_csv::{format_motion, parse_motion, read_motion, write_motion};
pub use robot::{parse_robot_skeleton, EffectorKind, EndEffector, JointLimits, RobotSkeleton};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::kinematics::{Axis, Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Offset from the parent joint in the parent's frame, meters.
    pub rest_offset: Vec3,
    /// Rotation channels in file-declared order; empty for end sites and
    /// robot joints.
    pub channel_order: Vec<Axis>,
}

impl Joint {
    pub fn new(name: &str, parent: Option<usize>, rest_offset: Vec3) -> Self {
        Self {
            name: name.to_string(),
            parent,
            rest_offset,
            channel_order: Vec::new(),
        }
    }

    pub fn bone_length(&self) -> f64 {
        self.rest_offset.norm()
    }
}

/// Joint tree in topological order: joint 0 is the root and every parent
/// index is smaller than its child's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
    pub root_index: usize,
    #[serde(skip)]
    names: HashMap<String, usize>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self, KinematicsError> {
        if joints.is_empty() {
            return Err(KinematicsError::InvalidSkeleton("no joints".into()));
        }
        let roots = joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(KinematicsError::InvalidSkeleton(format!(
                "expected one root, found {roots}"
            )));
        }
        let mut names = HashMap::with_capacity(joints.len());
        for (i, j) in joints.iter().enumerate() {
            match j.parent {
                None if i != 0 => {
                    return Err(KinematicsError::InvalidSkeleton(format!(
                        "root '{}' is not joint 0",
                        j.name
                    )))
                }
                Some(p) if p >= i => {
                    return Err(KinematicsError::InvalidSkeleton(format!(
                        "joint '{}' has parent index {p} not before it",
                        j.name
                    )))
                }
                _ => {}
            }
            if !j.rest_offset.iter().all(|v| v.is_finite()) {
                return Err(KinematicsError::InvalidSkeleton(format!(
                    "joint '{}' has non-finite offset",
                    j.name
                )));
            }
            if names.insert(j.name.clone(), i).is_some() {
                return Err(KinematicsError::InvalidSkeleton(format!(
                    "duplicate joint name '{}'",
                    j.name
                )));
            }
        }
        Ok(Self {
            joints,
            root_index: 0,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        if self.names.len() == self.joints.len() {
            self.names.get(name).copied()
        } else {
            // deserialized without the index
            self.joints.iter().position(|j| j.name == name)
        }
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    /// True when `ancestor` lies on the path from `j` to the root (inclusive
    /// of `j` itself).
    pub fn is_ancestor_or_self(&self, ancestor: usize, mut j: usize) -> bool {
        loop {
            if j == ancestor {
                return true;
            }
            match self.joints[j].parent {
                Some(p) => j = p,
                None => return false,
            }
        }
    }

    /// Sum of rest-offset magnitudes from `descendant` up to (excluding)
    /// `ancestor`. `None` if `ancestor` is not above `descendant`.
    pub fn chain_length(&self, ancestor: usize, descendant: usize) -> Option<f64> {
        let mut length = 0.0;
        let mut j = descendant;
        while j != ancestor {
            length += self.joints[j].bone_length();
            j = self.joints[j].parent?;
        }
        Some(length)
    }

    /// Copy with every rest offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Skeleton {
        let joints = self
            .joints
            .iter()
            .map(|j| Joint {
                rest_offset: j.rest_offset * factor,
                ..j.clone()
            })
            .collect();
        Skeleton::new(joints).expect("scaling preserves validity")
    }
}

/// One captured frame: root pose plus each joint's rotation relative to its
/// parent. `local_rotations[root_index]` is identity and unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionFrame {
    pub root_position: Vec3,
    pub root_orientation: Quat,
    pub local_rotations: Vec<Quat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    /// Seconds between frames.
    pub frame_time: f64,
    pub frames: Vec<MotionFrame>,
}

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 * self.frame_time
    }

    pub fn validate(&self, skeleton: &Skeleton) -> Result<(), KinematicsError> {
        if !(self.frame_time > 0.0) {
            return Err(KinematicsError::InvalidSkeleton(format!(
                "frame_time {} must be > 0",
                self.frame_time
            )));
        }
        for f in &self.frames {
            if f.local_rotations.len() != skeleton.len() {
                return Err(KinematicsError::DimensionMismatch {
                    expected: skeleton.len(),
                    actual: f.local_rotations.len(),
                });
            }
        }
        Ok(())
    }
}
