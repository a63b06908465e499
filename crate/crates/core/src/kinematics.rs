//! Forward kinematics over joint trees, revolute-chain Jacobians and the
//! quaternion helpers the rest of the pipeline is built on.
//!
//! Rotations are unit quaternions throughout. A joint's global transform is
//! its parent's global transform composed with `(rest_offset, local_rotation)`;
//! the root takes the frame's root pose directly.

use nalgebra::{Matrix3xX, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::KinematicsError;
use crate::mocap::{MotionFrame, RobotSkeleton, Skeleton};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Principal rotation axis, as used by BVH channel declarations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => Vec3::x(),
            Axis::Y => Vec3::y(),
            Axis::Z => Vec3::z(),
        }
    }

    /// Rotation of `radians` about this axis.
    pub fn rotation(self, radians: f64) -> Quat {
        Quat::from_axis_angle(&nalgebra::Unit::new_unchecked(self.unit()), radians)
    }
}

/// Rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Quat,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Quat::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(translation: Vec3, rotation: Quat) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// `self ∘ child`: express a child-frame transform in this frame.
    pub fn compose(&self, child: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * child.rotation,
            translation: self.translation + self.rotation * child.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let inv = self.rotation.inverse();
        Transform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.translation + self.rotation * p
    }
}

/// Position plus orientation; used for end-effector goals and root poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6D {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose6D {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self {
            position: Vec3::zeros(),
            orientation: Quat::identity(),
        }
    }
}

impl From<Transform> for Pose6D {
    fn from(t: Transform) -> Self {
        Pose6D {
            position: t.translation,
            orientation: t.rotation,
        }
    }
}

impl From<Pose6D> for Transform {
    fn from(p: Pose6D) -> Self {
        Transform {
            rotation: p.orientation,
            translation: p.position,
        }
    }
}

/// Global transforms of every joint given the root transform and per-joint
/// local rotations. The root's entry in `local_rotations` is ignored.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    root: &Transform,
    local_rotations: &[Quat],
) -> Result<Vec<Transform>, KinematicsError> {
    let n = skeleton.len();
    if local_rotations.len() != n {
        return Err(KinematicsError::DimensionMismatch {
            expected: n,
            actual: local_rotations.len(),
        });
    }
    let mut global: Vec<Transform> = Vec::with_capacity(n);
    for (j, joint) in skeleton.joints.iter().enumerate() {
        let t = match joint.parent {
            None => *root,
            Some(p) => {
                let parent = &global[p];
                Transform {
                    rotation: parent.rotation * local_rotations[j],
                    translation: parent.translation + parent.rotation * joint.rest_offset,
                }
            }
        };
        global.push(t);
    }
    Ok(global)
}

/// FK of a mocap frame on its source skeleton.
pub fn forward_kinematics_frame(
    skeleton: &Skeleton,
    frame: &MotionFrame,
) -> Result<Vec<Transform>, KinematicsError> {
    let root = Transform::new(frame.root_position, frame.root_orientation);
    forward_kinematics(skeleton, &root, &frame.local_rotations)
}

/// Root-relative FK of a robot at joint vector `theta` (root at identity).
pub fn robot_forward_kinematics(
    robot: &RobotSkeleton,
    theta: &[f64],
) -> Result<Vec<Transform>, KinematicsError> {
    let locals = robot.local_rotations(theta)?;
    forward_kinematics(&robot.skeleton, &Transform::identity(), &locals)
}

/// World axis of every movable joint plus the pivot it rotates about, from a
/// robot FK result.
pub(crate) fn joint_axes(robot: &RobotSkeleton, fk: &[Transform]) -> Vec<(Vec3, Vec3)> {
    robot
        .movable
        .iter()
        .enumerate()
        .map(|(dof, &j)| (fk[j].rotation * robot.axis(dof), fk[j].translation))
        .collect()
}

/// 3 × n_dof position Jacobian of `target_joint`'s origin. Column `i` is
/// `ω_i × (p_target − p_i)` for movable ancestors (inclusive), zero otherwise.
pub fn position_jacobian(
    robot: &RobotSkeleton,
    theta: &[f64],
    target_joint: usize,
) -> Result<Matrix3xX<f64>, KinematicsError> {
    let n = robot.skeleton.len();
    if target_joint >= n {
        return Err(KinematicsError::IndexOutOfRange {
            index: target_joint,
            len: n,
        });
    }
    let fk = robot_forward_kinematics(robot, theta)?;
    let axes = joint_axes(robot, &fk);
    let p_target = fk[target_joint].translation;
    let mut jac = Matrix3xX::zeros(robot.dof());
    let mut cursor = Some(target_joint);
    while let Some(j) = cursor {
        if let Some(dof) = robot.dof_of_joint[j] {
            let (omega, pivot) = axes[dof];
            jac.set_column(dof, &omega.cross(&(p_target - pivot)));
        }
        cursor = robot.skeleton.joints[j].parent;
    }
    Ok(jac)
}

/// Rotation vector (axis × angle, world frame) taking `q_current` to
/// `q_target`, on the shorter arc.
pub fn orientation_error(q_target: &Quat, q_current: &Quat) -> Vec3 {
    let rel = q_target * q_current.inverse();
    let q = rel.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let s = v.norm();
    if s < 1e-9 {
        // sin(θ/2) ≈ θ/2 for tiny angles
        v * (2.0 / w)
    } else {
        v * (2.0 * s.atan2(w) / s)
    }
}

/// Spherical linear interpolation on the shorter arc.
pub fn slerp(q0: &Quat, q1: &Quat, t: f64) -> Quat {
    if t == 0.0 {
        return *q0;
    }
    if t == 1.0 {
        return *q1;
    }
    let a = q0.quaternion().coords;
    let mut b = q1.quaternion().coords;
    let mut dot = a.dot(&b);
    if dot < 0.0 {
        b = -b;
        dot = -dot;
    }
    let mixed = if dot > 1.0 - 1e-12 {
        a * (1.0 - t) + b * t
    } else {
        let theta = dot.min(1.0).acos();
        let sin = theta.sin();
        a * (((1.0 - t) * theta).sin() / sin) + b * ((t * theta).sin() / sin)
    };
    Quat::from_quaternion(nalgebra::Quaternion::from(mixed))
}

/// Geodesic angle between two rotations.
pub fn angle_between(a: &Quat, b: &Quat) -> f64 {
    orientation_error(a, b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mocap::Joint;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn chain(offsets: &[Vec3]) -> Skeleton {
        let mut joints = vec![Joint::new("root", None, Vec3::zeros())];
        for (i, o) in offsets.iter().enumerate() {
            joints.push(Joint::new(&format!("j{i}"), Some(i), *o));
        }
        Skeleton::new(joints).unwrap()
    }

    fn random_quat(rng: &mut ChaCha8Rng) -> Quat {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        Quat::from_scaled_axis(v * rng.gen_range(0.0..PI))
    }

    fn homogeneous(t: &Vec3, q: &Quat) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(q.to_rotation_matrix().matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
        m
    }

    #[test]
    fn straight_chain() {
        let sk = chain(&[Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        // tip is the 2nd offset applied after the 1st joint
        let fk = forward_kinematics(&sk, &Transform::identity(), &[Quat::identity(); 3]).unwrap();
        assert_relative_eq!(fk[2].translation, Vec3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn single_rotation() {
        let sk = chain(&[Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        let mut rots = vec![Quat::identity(); 3];
        rots[1] = Axis::Z.rotation(FRAC_PI_2);
        let fk = forward_kinematics(&sk, &Transform::identity(), &rots).unwrap();
        assert_relative_eq!(fk[2].translation, Vec3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let sk = chain(&[Vec3::x()]);
        let err = forward_kinematics(&sk, &Transform::identity(), &[Quat::identity()]).unwrap_err();
        assert_eq!(
            err,
            KinematicsError::DimensionMismatch {
                expected: 2,
                actual: 1
            }
        );
    }

    #[test]
    fn matches_matrix_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let offsets: Vec<Vec3> = (0..9)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let sk = chain(&offsets);
        let rots: Vec<Quat> = (0..10).map(|_| random_quat(&mut rng)).collect();
        let root = Transform::new(Vec3::new(0.3, -0.2, 1.0), random_quat(&mut rng));
        let fk = forward_kinematics(&sk, &root, &rots).unwrap();

        // 4x4 oracle: M_j = M_parent · T(offset_j) · R(local_j)
        let mut m = homogeneous(&root.translation, &root.rotation);
        for j in 1..10 {
            m = m
                * homogeneous(&offsets[j - 1], &Quat::identity())
                * homogeneous(&Vec3::zeros(), &rots[j]);
            let p = m * Vector4::new(0.0, 0.0, 0.0, 1.0);
            assert_relative_eq!(fk[j].translation, p.xyz(), epsilon = 1e-10);
        }
    }

    #[test]
    fn root_rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let offsets: Vec<Vec3> = (0..6)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let sk = chain(&offsets);
        for _ in 0..20 {
            let rots: Vec<Quat> = (0..7).map(|_| random_quat(&mut rng)).collect();
            let root = Transform::new(
                Vec3::new(rng.gen(), rng.gen(), rng.gen()),
                random_quat(&mut rng),
            );
            let extra = random_quat(&mut rng);
            let base = forward_kinematics(&sk, &root, &rots).unwrap();
            let rotated_root = Transform::new(root.translation, extra * root.rotation);
            let rotated = forward_kinematics(&sk, &rotated_root, &rots).unwrap();
            for (a, b) in base.iter().zip(&rotated) {
                let expected = root.translation + extra * (a.translation - root.translation);
                assert_relative_eq!(b.translation, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn orientation_error_cases() {
        let q = Axis::Y.rotation(0.4);
        assert_eq!(orientation_error(&q, &q).norm(), 0.0);
        let e = orientation_error(&Axis::X.rotation(FRAC_PI_2), &Quat::identity());
        assert_relative_eq!(e, Vec3::new(FRAC_PI_2, 0.0, 0.0), epsilon = 1e-12);
        // sign-flipped quaternion is the same rotation
        let neg = Quat::new_unchecked(-q.into_inner());
        assert!(orientation_error(&q, &neg).norm() < 1e-12);
    }

    #[test]
    fn orientation_error_matches_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_quat(&mut rng);
            let b = random_quat(&mut rng);
            let r = a.to_rotation_matrix().matrix() * b.to_rotation_matrix().matrix().transpose();
            let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            let geodesic = cos.acos();
            assert!((orientation_error(&a, &b).norm() - geodesic).abs() < 1e-9);
        }
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let q0 = Quat::identity();
        let q1 = Axis::Z.rotation(FRAC_PI_2);
        assert_eq!(slerp(&q0, &q1, 0.0), q0);
        assert_eq!(slerp(&q0, &q1, 1.0), q1);
        let mid = slerp(&q0, &q1, 0.5);
        assert!(angle_between(&mid, &Axis::Z.rotation(FRAC_PI_4)) < 1e-9);
        for t in [0.0, 0.3, 0.7, 1.0] {
            assert!(angle_between(&slerp(&q1, &q1, t), &q1) < 1e-12);
        }
    }

    #[test]
    fn slerp_takes_shorter_arc() {
        let q0 = Axis::Z.rotation(0.1);
        let q1 = Quat::new_unchecked(-Axis::Z.rotation(0.5).into_inner());
        let mid = slerp(&q0, &q1, 0.5);
        assert!(angle_between(&mid, &Axis::Z.rotation(0.3)) < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn slerp_is_unit(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                         bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0, t in 0.0f64..=1.0) {
            let q0 = Quat::from_scaled_axis(Vec3::new(ax, ay, az) * 3.0);
            let q1 = Quat::from_scaled_axis(Vec3::new(bx, by, bz) * 3.0);
            let q = slerp(&q0, &q1, t);
            proptest::prop_assert!((q.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
