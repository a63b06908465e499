//! Style features of a robot motion frame and their transition windows.
//!
//! Per frame, in the base frame: base height, base linear and angular
//! velocity, gravity direction, joint positions, joint velocities and the
//! position of every foot. For the 31-DOF humanoid with two feet that is
//! `1 + 3 + 3 + 3 + 31 + 31 + 6 = 78` values.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::CriticError;
use crate::kinematics::{robot_forward_kinematics, Vec3};
use crate::mocap::{EffectorKind, RobotSkeleton};
use crate::postprocess::{RobotFrame, RobotMotion};

/// Length of one frame's feature vector.
pub fn style_dim(robot: &RobotSkeleton) -> usize {
    10 + 2 * robot.dof() + 3 * robot.effectors(EffectorKind::Foot).count()
}

pub fn style_feature(frame: &RobotFrame, robot: &RobotSkeleton) -> Result<Vec<f64>, CriticError> {
    if frame.theta.len() != robot.dof() || frame.theta_dot.len() != robot.dof() {
        return Err(CriticError::DimensionMismatch {
            expected: robot.dof(),
            actual: frame.theta.len(),
        });
    }
    let to_base = frame.root.orientation.inverse();
    let mut out = Vec::with_capacity(style_dim(robot));
    out.push(frame.root.position.z);
    out.extend((to_base * frame.root_linear_velocity).iter());
    out.extend((to_base * frame.root_angular_velocity).iter());
    out.extend((to_base * Vec3::new(0.0, 0.0, -1.0)).iter());
    out.extend(&frame.theta);
    out.extend(&frame.theta_dot);
    let fk = robot_forward_kinematics(robot, &frame.theta).expect("dimension checked");
    for foot in robot.effectors(EffectorKind::Foot) {
        out.extend(fk[foot.joint].translation.iter());
    }
    Ok(out)
}

/// Concatenated features of frames `i ..= i + n`.
pub fn extract_features(
    motion: &RobotMotion,
    robot: &RobotSkeleton,
    i: usize,
    n: usize,
) -> Result<Vec<f64>, CriticError> {
    if i + n >= motion.len() {
        return Err(CriticError::OutOfRange {
            index: i,
            n,
            len: motion.len(),
        });
    }
    let mut out = Vec::with_capacity(style_dim(robot) * (n + 1));
    for frame in &motion.frames[i..=i + n] {
        out.extend(style_feature(frame, robot)?);
    }
    Ok(out)
}

/// Every transition window of a motion, one per row.
pub fn transition_matrix(
    motion: &RobotMotion,
    robot: &RobotSkeleton,
    n: usize,
) -> Result<Array2<f64>, CriticError> {
    if motion.len() <= n {
        return Err(CriticError::OutOfRange {
            index: 0,
            n,
            len: motion.len(),
        });
    }
    let per_frame = motion
        .frames
        .iter()
        .map(|f| style_feature(f, robot))
        .collect::<Result<Vec<_>, _>>()?;
    let d = style_dim(robot);
    let rows = motion.len() - n;
    let mut out = Array2::zeros((rows, d * (n + 1)));
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        for k in 0..=n {
            for (j, v) in per_frame[r + k].iter().enumerate() {
                row[k * d + j] = *v;
            }
        }
    }
    Ok(out)
}

/// Per-column mean and standard deviation, frozen when the reference data is
/// loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_rows(rows: &Array2<f64>) -> Result<Self, CriticError> {
        if rows.nrows() == 0 {
            return Err(CriticError::EmptyBatch);
        }
        let n = rows.nrows() as f64;
        let mean: Vec<f64> = rows.columns().into_iter().map(|c| c.sum() / n).collect();
        let std = rows
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Columns with (near) zero spread are only centered.
    pub fn normalize(&self, rows: &mut Array2<f64>) -> Result<(), CriticError> {
        if rows.ncols() != self.dim() {
            return Err(CriticError::DimensionMismatch {
                expected: self.dim(),
                actual: rows.ncols(),
            });
        }
        for mut row in rows.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *s > 1e-9 { (*v - m) / s } else { *v - m };
            }
        }
        Ok(())
    }
}
