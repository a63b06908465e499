//! Cartesian retargeting through a primitive skeleton.
//!
//! For every source frame: FK on the source, the vector between each key
//! joint and its primitive parent, scaled by the bone ratio, summed from the
//! primitive root, then expressed in the robot root frame. An alignment
//! rotation `A` maps the source world axes onto the robot's (z-up, x-forward).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binding::PrimitiveSkeleton;
use crate::error::{BindError, Error, KinematicsError};
use crate::kinematics::{forward_kinematics_frame, Pose6D, Quat, Vec3};
use crate::mocap::{EffectorKind, MotionFrame, MotionSequence, RobotSkeleton, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectorTarget {
    pub kind: EffectorKind,
    /// Robot joint index.
    pub joint: usize,
    /// Root-relative pose.
    pub pose: Pose6D,
}

/// One frame of IK goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFrame {
    /// World frame.
    pub root_position: Vec3,
    pub root_orientation: Quat,
    /// Root-relative positions of key nodes `1..n` (the primitive root is
    /// omitted).
    pub key_positions: Vec<Vec3>,
    pub ee_poses: Vec<EffectorTarget>,
}

/// Which robot joints the entries of a [`TargetFrame`] refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkMapping {
    /// Robot joint of each `key_positions` entry.
    pub key_joints: Vec<usize>,
    /// Robot joint of each `ee_poses` entry.
    pub effectors: Vec<usize>,
}

impl IkMapping {
    pub fn new(primitive: &PrimitiveSkeleton, robot: &RobotSkeleton) -> Self {
        Self {
            key_joints: primitive
                .key_nodes
                .iter()
                .skip(1)
                .map(|k| k.target_index)
                .collect(),
            effectors: robot.end_effectors.iter().map(|e| e.joint).collect(),
        }
    }
}

/// Source-axis conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceAxes {
    /// Z up, X forward: same as the robot.
    #[default]
    ZUp,
    /// Y up, Z forward (BVH convention).
    YUp,
}

impl SourceAxes {
    /// Rotation taking source world vectors to robot world vectors.
    pub fn alignment(self) -> Quat {
        match self {
            SourceAxes::ZUp => Quat::identity(),
            SourceAxes::YUp => {
                // columns are the images of the source x, y, z axes
                let m = nalgebra::Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
                Quat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetConfig {
    pub source_axes: SourceAxes,
    /// Multiplier for the root translation; `None` uses the leg arc-length
    /// ratio of the binding.
    pub root_scale: Option<f64>,
    /// Pelvis height of the first frame in sequences; `None` keeps the
    /// scaled source height.
    pub origin_height: Option<f64>,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            source_axes: SourceAxes::ZUp,
            root_scale: None,
            origin_height: None,
        }
    }
}

/// Prepared source/primitive/robot triple.
#[derive(Debug, Clone)]
pub struct Retargeter<'a> {
    source: &'a Skeleton,
    primitive: &'a PrimitiveSkeleton,
    robot: &'a RobotSkeleton,
    alignment: Quat,
    root_scale: f64,
    origin_height: Option<f64>,
    /// Primitive node of each robot end effector.
    effector_nodes: Vec<usize>,
}

impl<'a> Retargeter<'a> {
    pub fn new(
        source: &'a Skeleton,
        primitive: &'a PrimitiveSkeleton,
        robot: &'a RobotSkeleton,
        config: &RetargetConfig,
    ) -> Result<Self, Error> {
        let (ns, nt) = (source.len(), robot.skeleton.len());
        if primitive.is_empty() {
            return Err(BindError::TooFewPairs(0).into());
        }
        for k in &primitive.key_nodes {
            if k.source_index >= ns {
                return Err(KinematicsError::IndexOutOfRange {
                    index: k.source_index,
                    len: ns,
                }
                .into());
            }
            if k.target_index >= nt {
                return Err(KinematicsError::IndexOutOfRange {
                    index: k.target_index,
                    len: nt,
                }
                .into());
            }
            if source.joints[k.source_index].name != k.source_name
                || robot.skeleton.joints[k.target_index].name != k.target_name
            {
                return Err(KinematicsError::InvalidSkeleton(format!(
                    "binding pair ({}, {}) does not belong to these skeletons",
                    k.source_name, k.target_name
                ))
                .into());
            }
        }
        let effector_nodes = robot
            .end_effectors
            .iter()
            .map(|e| {
                primitive.node_for_target(e.joint).ok_or_else(|| {
                    BindError::EffectorNotKey(robot.skeleton.joints[e.joint].name.clone())
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let root_scale = config
            .root_scale
            .unwrap_or_else(|| primitive.leg_ratio(robot));
        if !(root_scale.is_finite() && root_scale > 0.0) {
            return Err(Error::Config(format!(
                "root scale must be positive, got {root_scale}"
            )));
        }
        Ok(Self {
            source,
            primitive,
            robot,
            alignment: config.source_axes.alignment(),
            root_scale,
            origin_height: config.origin_height,
            effector_nodes,
        })
    }

    pub fn root_scale(&self) -> f64 {
        self.root_scale
    }

    pub fn mapping(&self) -> IkMapping {
        IkMapping::new(self.primitive, self.robot)
    }

    pub fn retarget_frame(&self, frame: &MotionFrame) -> Result<TargetFrame, Error> {
        let fk = forward_kinematics_frame(self.source, frame)?;
        let a = self.alignment;
        let nodes = &self.primitive.key_nodes;

        let root_orientation = a * frame.root_orientation * a.inverse();
        let root_position = (a * frame.root_position) * self.root_scale;
        let to_root = root_orientation.inverse();

        // world-aligned positions relative to the primitive root
        let mut chain = vec![Vec3::zeros(); nodes.len()];
        for k in 1..nodes.len() {
            let parent = nodes[k].primitive_parent.expect("only node 0 is the root");
            let rel =
                fk[nodes[k].source_index].translation - fk[nodes[parent].source_index].translation;
            chain[k] = chain[parent] + (a * rel) * self.primitive.ratio(k);
        }
        let key_positions: Vec<Vec3> = chain.iter().skip(1).map(|p| to_root * p).collect();

        let ee_poses = self
            .robot
            .end_effectors
            .iter()
            .zip(&self.effector_nodes)
            .map(|(e, &node)| {
                let world_q = a * fk[nodes[node].source_index].rotation * a.inverse();
                EffectorTarget {
                    kind: e.kind,
                    joint: e.joint,
                    pose: Pose6D::new(to_root * chain[node], to_root * world_q),
                }
            })
            .collect();

        Ok(TargetFrame {
            root_position,
            root_orientation,
            key_positions,
            ee_poses,
        })
    }

    /// Frame-wise retarget; the first frame's root is moved to the
    /// horizontal origin (and to `origin_height`, if configured).
    pub fn retarget_sequence(&self, seq: &MotionSequence) -> Result<Vec<TargetFrame>, Error> {
        seq.validate(self.source)?;
        let mut out = seq
            .frames
            .par_iter()
            .map(|f| self.retarget_frame(f))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = out.first() {
            let mut shift = Vec3::new(-first.root_position.x, -first.root_position.y, 0.0);
            if let Some(h) = self.origin_height {
                shift.z = h - first.root_position.z;
            }
            for t in &mut out {
                t.root_position += shift;
            }
        }
        Ok(out)
    }
}

/// Retarget one frame with the default configuration (z-up source, leg-ratio
/// root scale).
pub fn retarget_frame(
    frame: &MotionFrame,
    source: &Skeleton,
    primitive: &PrimitiveSkeleton,
    robot: &RobotSkeleton,
) -> Result<TargetFrame, Error> {
    Retargeter::new(source, primitive, robot, &RetargetConfig::default())?.retarget_frame(frame)
}

pub fn retarget_sequence(
    seq: &MotionSequence,
    source: &Skeleton,
    primitive: &PrimitiveSkeleton,
    robot: &RobotSkeleton,
    config: &RetargetConfig,
) -> Result<Vec<TargetFrame>, Error> {
    Retargeter::new(source, primitive, robot, config)?.retarget_sequence(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::{bind, BindingConfig};
    use crate::kinematics::{robot_forward_kinematics, Axis};
    use crate::synth;

    fn self_setup() -> (RobotSkeleton, PrimitiveSkeleton) {
        let robot = synth::humanoid();
        let names = synth::key_joint_names(&robot);
        let prim = bind(&robot.skeleton, &robot, &BindingConfig::identity(&names)).unwrap();
        (robot, prim)
    }

    #[test]
    fn self_binding_reproduces_root_relative_positions() {
        let (robot, prim) = self_setup();
        let rt =
            Retargeter::new(&robot.skeleton, &prim, &robot, &RetargetConfig::default()).unwrap();
        assert_eq!(rt.root_scale(), 1.0);
        let clip = synth::walk_clip(&robot, 20, 1.0 / 60.0, 1.0);
        for (frame, theta) in clip.frames.iter().zip(&clip.thetas) {
            let target = rt.retarget_frame(frame).unwrap();
            assert_eq!(target.key_positions.len(), prim.len() - 1);
            let fk = robot_forward_kinematics(&robot, theta).unwrap();
            let root = fk[0].translation;
            for (p, node) in target
                .key_positions
                .iter()
                .zip(prim.key_nodes.iter().skip(1))
            {
                assert!((p - (fk[node.target_index].translation - root)).norm() <= 1e-9);
            }
            for ee in &target.ee_poses {
                let q = fk[ee.joint].rotation;
                assert!(crate::kinematics::angle_between(&q, &ee.pose.orientation) <= 1e-9);
            }
        }
    }

    #[test]
    fn half_ratios_halve_a_straight_chain() {
        let (robot, mut prim) = self_setup();
        for b in &mut prim.bones {
            b.ratio = 0.5;
        }
        let frame = robot
            .motion_frame(
                Vec3::new(0.0, 0.0, 1.0),
                Quat::identity(),
                &vec![0.0; robot.dof()],
            )
            .unwrap();
        let base = {
            let (r, p) = self_setup();
            retarget_frame(&frame, &r.skeleton, &p, &r).unwrap()
        };
        let half = retarget_frame(&frame, &robot.skeleton, &prim, &robot).unwrap();
        for (a, b) in base.key_positions.iter().zip(&half.key_positions) {
            assert!((a * 0.5 - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn root_offset_translates_only_the_root() {
        let (robot, prim) = self_setup();
        let cfg = RetargetConfig {
            root_scale: Some(1.0),
            ..Default::default()
        };
        let rt = Retargeter::new(&robot.skeleton, &prim, &robot, &cfg).unwrap();
        let clip = synth::walk_clip(&robot, 3, 0.02, 1.0);
        let offset = Vec3::new(3.0, -1.0, 0.25);
        for f in &clip.frames {
            let mut moved = f.clone();
            moved.root_position += offset;
            let (a, b) = (
                rt.retarget_frame(f).unwrap(),
                rt.retarget_frame(&moved).unwrap(),
            );
            assert!((b.root_position - a.root_position - offset).norm() <= 1e-12);
            for (p, q) in a.key_positions.iter().zip(&b.key_positions) {
                assert!((p - q).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn yup_alignment_maps_axes() {
        let a = SourceAxes::YUp.alignment();
        assert!((a * Vec3::z() - Vec3::x()).norm() < 1e-12);
        assert!((a * Vec3::y() - Vec3::z()).norm() < 1e-12);
        assert!((a * Vec3::x() - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn sequence_starts_at_origin() {
        let (robot, prim) = self_setup();
        let cfg = RetargetConfig {
            origin_height: Some(0.9),
            ..Default::default()
        };
        let clip = synth::walk_clip(&robot, 5, 0.02, 1.0);
        let mut seq = clip.sequence();
        for f in &mut seq.frames {
            f.root_position += Vec3::new(5.0, 5.0, 0.0);
            f.root_orientation = Axis::Z.rotation(0.3) * f.root_orientation;
        }
        let out = retarget_sequence(&seq, &robot.skeleton, &prim, &robot, &cfg).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out[0].root_position.xy().norm() < 1e-12);
        assert!((out[0].root_position.z - 0.9).abs() < 1e-12);
    }

    #[test]
    fn constant_pose_gives_constant_targets() {
        let (robot, prim) = self_setup();
        let frame = robot
            .motion_frame(Vec3::new(0.0, 0.0, 0.9), Quat::identity(), &robot.neutral)
            .unwrap();
        let seq = MotionSequence {
            frame_time: 0.01,
            frames: vec![frame; 4],
        };
        let out = retarget_sequence(
            &seq,
            &robot.skeleton,
            &prim,
            &robot,
            &RetargetConfig::default(),
        )
        .unwrap();
        assert!(out.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn effector_outside_binding_is_rejected() {
        let robot = synth::humanoid();
        let prim = bind(
            &robot.skeleton,
            &robot,
            &BindingConfig::identity(&["WAIST", "CHEST_JOINT0"]),
        )
        .unwrap();
        let err = Retargeter::new(&robot.skeleton, &prim, &robot, &RetargetConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Bind(BindError::EffectorNotKey(_))));
    }
}
