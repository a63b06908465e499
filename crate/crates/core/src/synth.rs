//! Synthetic robots and gaits for tests, benches and the motion-feature
//! dataset. Joint trajectories are sinusoids around the neutral pose whose
//! amplitudes are shrunk to stay inside each joint's position limits.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::kinematics::{Axis, Pose6D, Quat, Vec3};
use crate::mocap::{parse_robot_skeleton, MotionFrame, MotionSequence, RobotSkeleton};
use crate::postprocess::{compute_velocities, RobotFrame, RobotMotion};

const HUMANOID_JSON: &str = include_str!("../tests/fixtures/humanoid31.json");

/// 31-DOF humanoid: 6 per leg, 3 chest, 2 head, 7 per arm.
pub fn humanoid() -> RobotSkeleton {
    parse_robot_skeleton(HUMANOID_JSON).expect("bundled humanoid fixture is valid")
}

pub fn humanoid_json() -> &'static str {
    HUMANOID_JSON
}

/// Declared key joints, or every joint when the robot declares none.
pub fn key_joint_names(robot: &RobotSkeleton) -> Vec<String> {
    robot.key_joints.clone().unwrap_or_else(|| {
        robot
            .skeleton
            .joints
            .iter()
            .map(|j| j.name.clone())
            .collect()
    })
}

/// Serial chain rooted at a fixed base: `axes.len()` revolute joints spaced
/// `link` apart along z, plus a fixed `tip` registered as a wrist effector.
pub fn serial_chain(axes: &[Axis], link: f64, limit: f64, vel_limit: f64) -> RobotSkeleton {
    let mut joints = vec![json!({"name": "base", "parent": null, "offset": [0.0, 0.0, 0.0]})];
    let mut parent = "base".to_string();
    for (i, axis) in axes.iter().enumerate() {
        let name = format!("j{i}");
        let offset = if i == 0 { 0.0 } else { link };
        let a = axis.unit();
        joints.push(json!({
            "name": name, "parent": parent, "offset": [0.0, 0.0, offset],
            "axis": [a.x, a.y, a.z],
            "limits": {"pos": [-limit, limit], "vel": [-vel_limit, vel_limit]}
        }));
        parent = name;
    }
    joints.push(json!({"name": "tip", "parent": parent, "offset": [0.0, 0.0, link]}));
    let doc = json!({"name": "chain", "joints": joints, "end_effectors": {"wrists": ["tip"]}});
    parse_robot_skeleton(&doc.to_string()).expect("generated chain is valid")
}

/// Planar arm in the xy plane: z-axis joints with links along x.
pub fn planar_arm(links: &[f64], limit: f64) -> RobotSkeleton {
    let mut joints = vec![json!({"name": "base", "parent": null, "offset": [0.0, 0.0, 0.0]})];
    let mut parent = "base".to_string();
    let mut prev_len = 0.0;
    for (i, len) in links.iter().enumerate() {
        let name = format!("j{i}");
        joints.push(json!({
            "name": name, "parent": parent, "offset": [prev_len, 0.0, 0.0], "axis": [0.0, 0.0, 1.0],
            "limits": {"pos": [-limit, limit], "vel": [-1e6, 1e6]}
        }));
        parent = name;
        prev_len = *len;
    }
    joints.push(json!({"name": "tip", "parent": parent, "offset": [prev_len, 0.0, 0.0]}));
    let doc = json!({"name": "planar", "joints": joints, "end_effectors": {"wrists": ["tip"]}});
    parse_robot_skeleton(&doc.to_string()).expect("generated arm is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gait {
    Stand,
    Squat,
    Walk,
    Run,
}

impl Gait {
    pub const ALL: [Gait; 4] = [Gait::Stand, Gait::Squat, Gait::Walk, Gait::Run];

    pub fn name(self) -> &'static str {
        match self {
            Gait::Stand => "stand",
            Gait::Squat => "squat",
            Gait::Walk => "walk",
            Gait::Run => "run",
        }
    }

    pub fn from_name(name: &str) -> Option<Gait> {
        Gait::ALL.into_iter().find(|g| g.name() == name)
    }

    /// Cycle frequency (Hz) and forward speed (m/s) at unit tempo.
    fn cadence(self) -> (f64, f64) {
        match self {
            Gait::Stand => (0.3, 0.0),
            Gait::Squat => (0.6, 0.4),
            Gait::Walk => (1.0, 1.0),
            Gait::Run => (1.5, 3.0),
        }
    }

    /// `(offset from neutral, amplitude, phase)` for a joint, by name.
    fn profile(self, name: &str) -> (f64, f64, f64) {
        let right = name.starts_with('R');
        let side = if right { PI } else { 0.0 };
        let leg = name.contains("LEG");
        let arm = name.contains("ARM");
        let idx = name
            .chars()
            .last()
            .and_then(|c| c.to_digit(10))
            .unwrap_or(0);
        match (self, leg, arm, idx) {
            (Gait::Stand, ..) => (0.0, 0.02, side + 0.3 * idx as f64),
            (Gait::Squat, true, _, 2) => (-0.5, 0.3, side),
            (Gait::Squat, true, _, 3) => (0.7, 0.3, side + 1.2),
            (Gait::Squat, true, _, 4) => (-0.3, 0.15, side + 0.4),
            (Gait::Squat, _, true, 0) => (-0.5, 0.2, side + PI),
            (Gait::Walk, true, _, 2) => (0.0, 0.4, side),
            (Gait::Walk, true, _, 3) => (0.1, 0.35, side + 1.2),
            (Gait::Walk, true, _, 4) => (-0.05, 0.2, side + 0.4),
            (Gait::Walk, _, true, 0) => (0.0, 0.3, side + PI),
            (Gait::Walk, _, true, 3) => (-0.1, 0.15, side),
            (Gait::Run, true, _, 2) => (-0.2, 0.7, side),
            (Gait::Run, true, _, 3) => (0.6, 0.6, side + 1.2),
            (Gait::Run, true, _, 4) => (-0.1, 0.35, side + 0.4),
            (Gait::Run, _, true, 0) => (-0.2, 0.6, side + PI),
            (Gait::Run, _, true, 3) => (-0.9, 0.2, side),
            (_, _, _, i) => (0.0, 0.05, side + 0.7 * i as f64),
        }
    }
}

/// A generated clip: the robot's joint trajectory plus the mocap frames a
/// reader would produce for it.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub frame_time: f64,
    pub roots: Vec<Pose6D>,
    pub thetas: Vec<Vec<f64>>,
    pub frames: Vec<MotionFrame>,
}

impl SynthClip {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn sequence(&self) -> MotionSequence {
        MotionSequence {
            frame_time: self.frame_time,
            frames: self.frames.clone(),
        }
    }

    /// Joint-space motion with finite-difference velocities.
    pub fn robot_motion(&self, robot: &RobotSkeleton) -> RobotMotion {
        let mut m = RobotMotion::new(self.frame_time, robot.dof_names());
        m.frames = self
            .roots
            .iter()
            .zip(&self.thetas)
            .map(|(r, t)| RobotFrame::at_rest(*r, t.clone()))
            .collect();
        if m.len() >= 2 {
            compute_velocities(&m).expect("two or more frames")
        } else {
            m
        }
    }
}

/// Joint vector of `gait` at cycle phase `phase` (radians).
pub fn gait_pose(robot: &RobotSkeleton, gait: Gait, phase: f64) -> Vec<f64> {
    (0..robot.dof())
        .map(|d| {
            let name = &robot.skeleton.joints[robot.movable[d]].name;
            let (lo, hi) = robot.limits(d).position;
            let (offset, amp, shift) = gait.profile(name);
            let center = (robot.neutral[d] + offset).clamp(lo, hi);
            let room = (hi - center).min(center - lo).max(0.0) * 0.95;
            center + amp.min(room) * (phase + shift).sin()
        })
        .collect()
}

/// `frames` samples of `gait` at tempo `tempo` starting at phase `phase0`.
pub fn gait_clip(
    robot: &RobotSkeleton,
    gait: Gait,
    frames: usize,
    frame_time: f64,
    tempo: f64,
    phase0: f64,
) -> SynthClip {
    let (freq, speed) = gait.cadence();
    let (freq, speed) = (freq * tempo, speed * tempo);
    let height = match gait {
        Gait::Squat => 0.75,
        Gait::Run => 0.88,
        _ => 0.9,
    };
    let mut clip = SynthClip {
        frame_time,
        roots: Vec::new(),
        thetas: Vec::new(),
        frames: Vec::new(),
    };
    for i in 0..frames {
        let t = i as f64 * frame_time;
        let phase = phase0 + TAU * freq * t;
        let bob = match gait {
            Gait::Squat => 0.02 * (2.0 * phase).cos(),
            Gait::Stand => 0.0,
            _ => 0.02 * (2.0 * phase).cos(),
        };
        let position = Vec3::new(speed * t, 0.03 * phase.sin(), height + bob);
        let orientation =
            Axis::Z.rotation(0.05 * phase.sin()) * Axis::Y.rotation(0.03 * (2.0 * phase).sin());
        let theta = gait_pose(robot, gait, phase);
        clip.frames.push(
            robot
                .motion_frame(position, orientation, &theta)
                .expect("dimension matches"),
        );
        clip.roots.push(Pose6D::new(position, orientation));
        clip.thetas.push(theta);
    }
    clip
}

pub fn walk_clip(robot: &RobotSkeleton, frames: usize, frame_time: f64, tempo: f64) -> SynthClip {
    gait_clip(robot, Gait::Walk, frames, frame_time, tempo, 0.0)
}

/// Root pose helper for tests that need a fixed upright base.
pub fn upright(height: f64) -> Pose6D {
    Pose6D::new(Vec3::new(0.0, 0.0, height), Quat::identity())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn humanoid_has_31_dof() {
        let r = humanoid();
        assert_eq!(r.dof(), 31);
        assert_eq!(key_joint_names(&r).len(), 13);
        assert!(r.within_limits(&r.neutral));
    }

    #[test]
    fn gaits_stay_within_limits() {
        let r = humanoid();
        for g in Gait::ALL {
            let clip = gait_clip(&r, g, 200, 0.01, 1.3, 0.4);
            assert!(clip.thetas.iter().all(|t| r.within_limits(t)), "{g:?}");
        }
    }

    #[test]
    fn chain_has_requested_dof() {
        let c = serial_chain(&[Axis::Z, Axis::Y, Axis::X], 0.2, 2.0, 5.0);
        assert_eq!(c.dof(), 3);
        assert_eq!(c.end_effectors.len(), 1);
    }
}
