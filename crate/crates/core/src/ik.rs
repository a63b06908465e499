//! Whole-body IK: minimize `κ₁C₁ + κ₂C₂ + κ₃C₃` over the joint vector,
//! subject to position limits and the per-frame velocity box.
//!
//! * `C₁ = Σ_k ‖p*_k − p_k(θ)‖²` over key joints,
//! * `C₂ = Σ_e ‖p*_e − p_e(θ)‖² + rot_scale · ‖log(q*_e q_e(θ)⁻¹)‖²`,
//! * `C₃ = ‖θ − θ_prev‖²`.
//!
//! The solver is projected gradient descent with a Barzilai-Borwein trial
//! step and Armijo backtracking along the projection arc, so every accepted
//! step decreases the cost and every iterate is feasible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, KinematicsError};
use crate::kinematics::{joint_axes, orientation_error, robot_forward_kinematics, Transform, Vec3};
use crate::mocap::RobotSkeleton;
use crate::postprocess::{compute_velocities, RobotFrame, RobotMotion};
use crate::retarget::{IkMapping, TargetFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkWeights {
    /// `(κ₁, κ₂, κ₃)`.
    pub kappa: [f64; 3],
    /// Weight of squared orientation error (rad²) inside `C₂`.
    pub rot_scale: f64,
}

impl Default for IkWeights {
    fn default() -> Self {
        Self {
            kappa: [1.0, 1.0, 0.2],
            rot_scale: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    pub max_iters: usize,
    /// Stop once the accepted step or the projected gradient is shorter.
    pub step_tol: f64,
    /// Key-joint residual (meters) below which a stalled solve counts as
    /// converged.
    pub tol_pos: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Cost decrease over the last `stall_window` iterations that counts as
    /// stalled.
    pub stall_tol: f64,
    pub stall_window: usize,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step_tol: 1e-7,
            tol_pos: 5e-3,
            armijo_c: 1e-4,
            shrink: 0.5,
            stall_tol: 1e-10,
            stall_window: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub theta: Vec<f64>,
    pub cost: CostBreakdown,
    pub converged: bool,
    /// Accepted steps.
    pub iterations: usize,
    /// Total cost at the start and after every accepted step.
    pub trace: Vec<f64>,
}

struct Problem<'a> {
    robot: &'a RobotSkeleton,
    mapping: &'a IkMapping,
    target: &'a TargetFrame,
    theta_prev: &'a [f64],
    weights: IkWeights,
}

impl<'a> Problem<'a> {
    fn new(
        robot: &'a RobotSkeleton,
        mapping: &'a IkMapping,
        target: &'a TargetFrame,
        theta_prev: &'a [f64],
        weights: IkWeights,
    ) -> Result<Self, KinematicsError> {
        let checks = [
            (robot.dof(), theta_prev.len()),
            (mapping.key_joints.len(), target.key_positions.len()),
            (mapping.effectors.len(), target.ee_poses.len()),
        ];
        for (expected, actual) in checks {
            if expected != actual {
                return Err(KinematicsError::DimensionMismatch { expected, actual });
            }
        }
        let n = robot.skeleton.len();
        if let Some(&j) = mapping
            .key_joints
            .iter()
            .chain(&mapping.effectors)
            .find(|&&j| j >= n)
        {
            return Err(KinematicsError::IndexOutOfRange { index: j, len: n });
        }
        Ok(Self {
            robot,
            mapping,
            target,
            theta_prev,
            weights,
        })
    }

    fn fk(&self, theta: &[f64]) -> Result<Vec<Transform>, KinematicsError> {
        robot_forward_kinematics(self.robot, theta)
    }

    fn cost_at(&self, theta: &[f64], fk: &[Transform]) -> CostBreakdown {
        let c1 = self
            .mapping
            .key_joints
            .iter()
            .zip(&self.target.key_positions)
            .map(|(&j, p)| (p - fk[j].translation).norm_squared())
            .sum::<f64>();
        let c2 = self
            .mapping
            .effectors
            .iter()
            .zip(&self.target.ee_poses)
            .map(|(&j, e)| {
                (e.pose.position - fk[j].translation).norm_squared()
                    + self.weights.rot_scale
                        * orientation_error(&e.pose.orientation, &fk[j].rotation).norm_squared()
            })
            .sum::<f64>();
        let c3 = theta
            .iter()
            .zip(self.theta_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        let [k1, k2, k3] = self.weights.kappa;
        CostBreakdown {
            c1,
            c2,
            c3,
            total: k1 * c1 + k2 * c2 + k3 * c3,
        }
    }

    fn cost(&self, theta: &[f64]) -> Result<CostBreakdown, KinematicsError> {
        let fk = self.fk(theta)?;
        Ok(self.cost_at(theta, &fk))
    }

    fn cost_and_gradient(
        &self,
        theta: &[f64],
    ) -> Result<(CostBreakdown, Vec<f64>), KinematicsError> {
        let fk = self.fk(theta)?;
        let cost = self.cost_at(theta, &fk);
        let axes = joint_axes(self.robot, &fk);
        let [k1, k2, k3] = self.weights.kappa;
        let mut grad: Vec<f64> = theta
            .iter()
            .zip(self.theta_prev)
            .map(|(a, b)| 2.0 * k3 * (a - b))
            .collect();

        // d‖r‖²/dθ_d = -2 r · (ω_d × (p − p_d)) for ancestors d of the point
        let add_position = |joint: usize, residual: Vec3, scale: f64, grad: &mut [f64]| {
            let p = fk[joint].translation;
            let mut cursor = Some(joint);
            while let Some(j) = cursor {
                if let Some(d) = self.robot.dof_of_joint[j] {
                    let (omega, pivot) = axes[d];
                    grad[d] -= 2.0 * scale * residual.dot(&omega.cross(&(p - pivot)));
                }
                cursor = self.robot.skeleton.parent(j);
            }
        };
        for (&j, p) in self
            .mapping
            .key_joints
            .iter()
            .zip(&self.target.key_positions)
        {
            add_position(j, p - fk[j].translation, k1, &mut grad);
        }
        for (&j, e) in self.mapping.effectors.iter().zip(&self.target.ee_poses) {
            add_position(j, e.pose.position - fk[j].translation, k2, &mut grad);
            // d‖φ‖²/dθ_d = -2 φ · ω_d, exact for the log map
            let phi = orientation_error(&e.pose.orientation, &fk[j].rotation);
            let scale = k2 * self.weights.rot_scale;
            let mut cursor = Some(j);
            while let Some(a) = cursor {
                if let Some(d) = self.robot.dof_of_joint[a] {
                    grad[d] -= 2.0 * scale * phi.dot(&axes[d].0);
                }
                cursor = self.robot.skeleton.parent(a);
            }
        }
        Ok((cost, grad))
    }
}

pub fn ik_cost(
    theta: &[f64],
    target: &TargetFrame,
    theta_prev: &[f64],
    weights: &IkWeights,
    robot: &RobotSkeleton,
    mapping: &IkMapping,
) -> Result<CostBreakdown, KinematicsError> {
    Problem::new(robot, mapping, target, theta_prev, *weights)?.cost(theta)
}

pub fn ik_gradient(
    theta: &[f64],
    target: &TargetFrame,
    theta_prev: &[f64],
    weights: &IkWeights,
    robot: &RobotSkeleton,
    mapping: &IkMapping,
) -> Result<Vec<f64>, KinematicsError> {
    Ok(Problem::new(robot, mapping, target, theta_prev, *weights)?
        .cost_and_gradient(theta)?
        .1)
}

/// Per-DOF feasible interval: position limits intersected with the velocity
/// box around `theta_prev` when a frame time is given. An empty intersection
/// collapses onto the position limit nearest the velocity box.
pub fn feasible_box(
    robot: &RobotSkeleton,
    theta_prev: &[f64],
    frame_time: Option<f64>,
) -> Vec<(f64, f64)> {
    (0..robot.dof())
        .map(|d| {
            let lim = robot.limits(d);
            let (mut lo, mut hi) = lim.position;
            if let Some(dt) = frame_time {
                let vlo = theta_prev[d] + lim.velocity.0 * dt;
                let vhi = theta_prev[d] + lim.velocity.1 * dt;
                if vlo > hi {
                    return (hi, hi);
                }
                if vhi < lo {
                    return (lo, lo);
                }
                lo = lo.max(vlo);
                hi = hi.min(vhi);
            }
            (lo, hi)
        })
        .collect()
}

fn project(theta: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    theta
        .iter()
        .zip(bounds)
        .map(|(t, (lo, hi))| t.clamp(*lo, *hi))
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve one frame starting from `theta_prev`. Without `frame_time` there is
/// no velocity box.
#[allow(clippy::too_many_arguments)]
pub fn solve_frame(
    target: &TargetFrame,
    theta_prev: &[f64],
    robot: &RobotSkeleton,
    mapping: &IkMapping,
    weights: &IkWeights,
    opts: &IkOptions,
    frame_time: Option<f64>,
) -> Result<IkSolution, KinematicsError> {
    solve_frame_from(
        target, theta_prev, theta_prev, robot, mapping, weights, opts, frame_time,
    )
}

/// As [`solve_frame`], but starting the descent at `theta_start` instead of
/// `theta_prev`.
#[allow(clippy::too_many_arguments)]
pub fn solve_frame_from(
    target: &TargetFrame,
    theta_start: &[f64],
    theta_prev: &[f64],
    robot: &RobotSkeleton,
    mapping: &IkMapping,
    weights: &IkWeights,
    opts: &IkOptions,
    frame_time: Option<f64>,
) -> Result<IkSolution, KinematicsError> {
    let problem = Problem::new(robot, mapping, target, theta_prev, *weights)?;
    if theta_start.len() != robot.dof() {
        return Err(KinematicsError::DimensionMismatch {
            expected: robot.dof(),
            actual: theta_start.len(),
        });
    }
    let bounds = feasible_box(robot, theta_prev, frame_time);
    let mut theta = project(theta_start, &bounds);
    let (mut cost, mut grad) = problem.cost_and_gradient(&theta)?;
    let mut trace = vec![cost.total];
    let mut stationary = false;

    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    // first trial moves the steepest joint by at most 0.1 rad
    let mut alpha = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };

    for _ in 0..opts.max_iters {
        let pg = project(
            &theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t - g)
                .collect::<Vec<_>>(),
            &bounds,
        );
        if norm(pg.iter().zip(&theta).map(|(a, b)| a - b)) < opts.step_tol {
            stationary = true;
            break;
        }
        let mut step = alpha;
        let accepted = loop {
            let cand = project(
                &theta
                    .iter()
                    .zip(&grad)
                    .map(|(t, g)| t - step * g)
                    .collect::<Vec<_>>(),
                &bounds,
            );
            let decrease: f64 = grad
                .iter()
                .zip(cand.iter().zip(&theta))
                .map(|(g, (c, t))| g * (c - t))
                .sum();
            let c = problem.cost(&cand)?;
            if c.total <= cost.total + opts.armijo_c * decrease {
                break Some(cand);
            }
            step *= opts.shrink;
            if step * gmax.max(1.0) < 1e-18 {
                break None;
            }
        };
        let Some(next) = accepted else {
            stationary = true;
            break;
        };
        let (next_cost, next_grad) = problem.cost_and_gradient(&next)?;
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let s_norm = norm(s.iter().copied());
        let sy: f64 = s
            .iter()
            .zip(next_grad.iter().zip(&grad))
            .map(|(s, (a, b))| s * (a - b))
            .sum();
        alpha = if sy > 0.0 {
            (s_norm * s_norm / sy).clamp(1e-12, 1e6)
        } else {
            (step * 2.0).min(1e6)
        };
        theta = next;
        cost = next_cost;
        grad = next_grad;
        trace.push(cost.total);
        if s_norm < opts.step_tol {
            stationary = true;
            break;
        }
    }

    let iterations = trace.len() - 1;
    let window = opts.stall_window.min(iterations);
    let recent_decrease = trace[iterations - window] - trace[iterations];
    let stalled = stationary || recent_decrease < opts.stall_tol;
    let converged = stalled && cost.c1 < opts.tol_pos * opts.tol_pos;
    Ok(IkSolution {
        theta,
        cost,
        converged,
        iterations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub cost: CostBreakdown,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSolution {
    pub motion: RobotMotion,
    pub reports: Vec<FrameReport>,
}

impl SequenceSolution {
    pub fn converged_fraction(&self) -> f64 {
        if self.reports.is_empty() {
            return 1.0;
        }
        self.reports.iter().filter(|r| r.converged).count() as f64 / self.reports.len() as f64
    }
}

/// Distance between each effector target and the effector reached at
/// `theta`, in the root frame.
pub fn effector_errors(
    target: &TargetFrame,
    theta: &[f64],
    robot: &RobotSkeleton,
) -> Result<Vec<f64>, Error> {
    let fk = robot_forward_kinematics(robot, theta)?;
    target
        .ee_poses
        .iter()
        .map(|e| match fk.get(e.joint) {
            Some(t) => Ok((t.translation - e.pose.position).norm()),
            None => Err(KinematicsError::IndexOutOfRange {
                index: e.joint,
                len: fk.len(),
            }
            .into()),
        })
        .collect()
}

/// Solve frames in order, each warm-started from the previous solution.
/// Frame 0 starts from `theta_init` with no displacement goal and no
/// velocity box.
pub fn solve_sequence(
    targets: &[TargetFrame],
    theta_init: &[f64],
    robot: &RobotSkeleton,
    mapping: &IkMapping,
    weights: &IkWeights,
    opts: &IkOptions,
    frame_time: f64,
) -> Result<SequenceSolution, Error> {
    if !robot.within_limits(theta_init) {
        return Err(KinematicsError::InvalidSkeleton(
            "initial joint vector violates position limits".into(),
        )
        .into());
    }
    let mut motion = RobotMotion::new(frame_time, robot.dof_names());
    let mut reports = Vec::with_capacity(targets.len());
    let mut prev = theta_init.to_vec();
    for (t, target) in targets.iter().enumerate() {
        let sol = if t == 0 {
            let w = IkWeights {
                kappa: [weights.kappa[0], weights.kappa[1], 0.0],
                ..*weights
            };
            solve_frame(target, &prev, robot, mapping, &w, opts, None)?
        } else {
            solve_frame(
                target,
                &prev,
                robot,
                mapping,
                weights,
                opts,
                Some(frame_time),
            )?
        };
        reports.push(FrameReport {
            cost: sol.cost,
            converged: sol.converged,
            iterations: sol.iterations,
        });
        let root = crate::kinematics::Pose6D::new(target.root_position, target.root_orientation);
        motion
            .frames
            .push(RobotFrame::at_rest(root, sol.theta.clone()));
        prev = sol.theta;
    }
    if motion.len() >= 2 {
        motion = compute_velocities(&motion)?;
    }
    Ok(SequenceSolution { motion, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{Axis, Pose6D, Quat};
    use crate::retarget::EffectorTarget;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Targets read off FK at `theta`: every mapped point and effector pose.
    fn planted(robot: &RobotSkeleton, mapping: &IkMapping, theta: &[f64]) -> TargetFrame {
        let fk = robot_forward_kinematics(robot, theta).unwrap();
        TargetFrame {
            root_position: Vec3::zeros(),
            root_orientation: Quat::identity(),
            key_positions: mapping
                .key_joints
                .iter()
                .map(|&j| fk[j].translation)
                .collect(),
            ee_poses: mapping
                .effectors
                .iter()
                .map(|&j| EffectorTarget {
                    kind: crate::mocap::EffectorKind::Wrist,
                    joint: j,
                    pose: Pose6D::new(fk[j].translation, fk[j].rotation),
                })
                .collect(),
        }
    }

    fn chain7() -> (RobotSkeleton, IkMapping) {
        let axes = [
            Axis::Z,
            Axis::Y,
            Axis::X,
            Axis::Y,
            Axis::Z,
            Axis::Y,
            Axis::X,
        ];
        let robot = synth::serial_chain(&axes, 0.25, 2.5, 50.0);
        let tip = robot.skeleton.index_of("tip").unwrap();
        let mapping = IkMapping {
            key_joints: vec![
                robot.skeleton.index_of("j3").unwrap(),
                robot.skeleton.index_of("j5").unwrap(),
                tip,
            ],
            effectors: vec![tip],
        };
        (robot, mapping)
    }

    #[test]
    fn exact_target_has_zero_cost_and_gradient() {
        let (robot, mapping) = chain7();
        let theta = vec![0.3, -0.2, 0.5, 1.0, -0.7, 0.4, 0.1];
        let target = planted(&robot, &mapping, &theta);
        let w = IkWeights::default();
        let c = ik_cost(&theta, &target, &theta, &w, &robot, &mapping).unwrap();
        assert!(c.total.abs() < 1e-20);
        let g = ik_gradient(&theta, &target, &theta, &w, &robot, &mapping).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn displacement_only_when_moved() {
        let (robot, mapping) = chain7();
        let theta = vec![0.0; 7];
        let mut target = planted(&robot, &mapping, &theta);
        target.key_positions[0].x += 0.1;
        let c = ik_cost(
            &theta,
            &target,
            &theta,
            &IkWeights::default(),
            &robot,
            &mapping,
        )
        .unwrap();
        assert_eq!(c.c3, 0.0);
        assert!(c.c1 > 0.0);
    }

    #[test]
    fn weighted_total() {
        // one key point 1 m off, one effector 1 m off, one joint displaced 1 rad
        let robot = synth::planar_arm(&[1.0], 3.0);
        let tip = robot.skeleton.index_of("tip").unwrap();
        let mapping = IkMapping {
            key_joints: vec![tip],
            effectors: vec![tip],
        };
        let theta = [1.0];
        let mut target = planted(&robot, &mapping, &theta);
        target.key_positions[0].z += 1.0;
        target.ee_poses[0].pose.position.z += 1.0;
        let c = ik_cost(
            &theta,
            &target,
            &[0.0],
            &IkWeights::default(),
            &robot,
            &mapping,
        )
        .unwrap();
        assert!(
            (c.c1 - 1.0).abs() < 1e-12 && (c.c2 - 1.0).abs() < 1e-12 && (c.c3 - 1.0).abs() < 1e-12
        );
        assert!((c.total - 2.2).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (robot, mapping) = chain7();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = IkWeights::default();
        for _ in 0..20 {
            let star: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let target = planted(&robot, &mapping, &star);
            let theta: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let prev: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = ik_gradient(&theta, &target, &prev, &w, &robot, &mapping).unwrap();
            let h = 1e-6;
            for d in 0..7 {
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[d] += h;
                b[d] -= h;
                let fa = ik_cost(&a, &target, &prev, &w, &robot, &mapping)
                    .unwrap()
                    .total;
                let fb = ik_cost(&b, &target, &prev, &w, &robot, &mapping)
                    .unwrap()
                    .total;
                let fd = (fa - fb) / (2.0 * h);
                assert!(
                    (g[d] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                    "dof {d}: {} vs {fd}",
                    g[d]
                );
            }
        }
    }

    #[test]
    fn planted_solution_is_recovered() {
        let (robot, mapping) = chain7();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let star: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let prev: Vec<f64> = star.iter().map(|t| t + rng.gen_range(-0.2..0.2)).collect();
        let target = planted(&robot, &mapping, &star);
        let w = IkWeights {
            kappa: [1.0, 1.0, 0.0],
            ..Default::default()
        };
        let sol = solve_frame(
            &target,
            &prev,
            &robot,
            &mapping,
            &w,
            &IkOptions::default(),
            Some(0.01),
        )
        .unwrap();
        assert!(sol.converged);
        assert!(sol.cost.c1 <= 1e-8, "{:?}", sol.cost);
        assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unreachable_target_reports_reach_gap() {
        let robot = synth::planar_arm(&[0.5, 0.4, 0.3], 3.0);
        let tip = robot.skeleton.index_of("tip").unwrap();
        let mapping = IkMapping {
            key_joints: vec![tip],
            effectors: vec![],
        };
        let goal = Vec3::new(0.9, 1.2, 0.0);
        let target = TargetFrame {
            root_position: Vec3::zeros(),
            root_orientation: Quat::identity(),
            key_positions: vec![goal],
            ee_poses: vec![],
        };
        let w = IkWeights {
            kappa: [1.0, 1.0, 0.0],
            ..Default::default()
        };
        let sol = solve_frame(
            &target,
            &[0.3, 0.2, 0.1],
            &robot,
            &mapping,
            &w,
            &IkOptions::default(),
            None,
        )
        .unwrap();
        let gap = goal.norm() - 1.2;
        assert!(!sol.converged);
        assert!(
            (sol.cost.c1 - gap * gap).abs() <= 0.05 * gap * gap,
            "{} vs {}",
            sol.cost.c1,
            gap * gap
        );
    }

    #[test]
    fn velocity_box_saturates() {
        let (robot, mapping) = chain7();
        let star = vec![1.0; 7];
        let target = planted(&robot, &mapping, &star);
        let prev = vec![0.0; 7];
        let dt = 0.001;
        let w = IkWeights {
            kappa: [1.0, 1.0, 0.0],
            ..Default::default()
        };
        let sol = solve_frame(
            &target,
            &prev,
            &robot,
            &mapping,
            &w,
            &IkOptions::default(),
            Some(dt),
        )
        .unwrap();
        let vmax = robot.limits(0).velocity.1;
        let rate = sol.theta.iter().map(|t| t.abs() / dt).fold(0.0, f64::max);
        assert!((rate - vmax).abs() <= 1e-9 * vmax, "{rate}");
        for (t, (lo, hi)) in sol.theta.iter().zip(feasible_box(&robot, &prev, Some(dt))) {
            assert!(*t >= lo && *t <= hi);
        }
    }

    #[test]
    fn locked_joint_never_moves() {
        let text = r#"{"name": "l", "joints": [
            {"name": "base", "parent": null, "offset": [0,0,0]},
            {"name": "a", "parent": "base", "offset": [0,0,0], "axis": [0,0,1], "limits": {"pos": [0.4, 0.4], "vel": [-5, 5]}},
            {"name": "b", "parent": "a", "offset": [1,0,0], "axis": [0,0,1], "limits": {"pos": [-3, 3], "vel": [-5, 5]}},
            {"name": "tip", "parent": "b", "offset": [1,0,0]}]}"#;
        let robot = crate::mocap::parse_robot_skeleton(text).unwrap();
        let mapping = IkMapping {
            key_joints: vec![3],
            effectors: vec![],
        };
        let target = TargetFrame {
            root_position: Vec3::zeros(),
            root_orientation: Quat::identity(),
            key_positions: vec![Vec3::new(0.0, 2.0, 0.0)],
            ee_poses: vec![],
        };
        let sol = solve_frame(
            &target,
            &[0.4, 0.0],
            &robot,
            &mapping,
            &IkWeights::default(),
            &IkOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(sol.theta[0], 0.4);
    }

    #[test]
    fn prefers_the_solution_nearer_the_previous_frame() {
        // two-link planar arm: elbow-up and elbow-down reach the same point
        let robot = synth::planar_arm(&[1.0, 1.0], 3.0);
        let tip = robot.skeleton.index_of("tip").unwrap();
        let mapping = IkMapping {
            key_joints: vec![tip],
            effectors: vec![],
        };
        let up = [0.2, 1.2];
        let down = [1.4, -1.2];
        let t_up = planted(&robot, &mapping, &up);
        let t_down = planted(&robot, &mapping, &down);
        assert!((t_up.key_positions[0] - t_down.key_positions[0]).norm() < 1e-12);
        let w = IkWeights {
            kappa: [1.0, 0.0, 1e-4],
            ..Default::default()
        };
        let opts = IkOptions {
            max_iters: 2000,
            ..Default::default()
        };
        for (sol, prev) in [(up, [0.5, 0.9]), (down, [1.1, -0.9])] {
            let got = solve_frame(&t_up, &prev, &robot, &mapping, &w, &opts, None).unwrap();
            assert!(
                (got.theta[0] - sol[0]).abs() < 1e-2 && (got.theta[1] - sol[1]).abs() < 1e-2,
                "{:?}",
                got.theta
            );
        }
    }

    #[test]
    fn constant_targets_settle() {
        let robot = synth::humanoid();
        let names = synth::key_joint_names(&robot);
        let prim = crate::binding::bind(
            &robot.skeleton,
            &robot,
            &crate::binding::BindingConfig::identity(&names),
        )
        .unwrap();
        let mapping = IkMapping::new(&prim, &robot);
        let clip = synth::walk_clip(&robot, 1, 0.01, 1.0);
        let target =
            crate::retarget::retarget_frame(&clip.frames[0], &robot.skeleton, &prim, &robot)
                .unwrap();
        let targets = vec![target; 4];
        let out = solve_sequence(
            &targets,
            &robot.neutral,
            &robot,
            &mapping,
            &IkWeights::default(),
            &IkOptions::default(),
            0.01,
        )
        .unwrap();
        let last = &out.motion.frames;
        for w in last[1..].windows(2) {
            let d = norm(w[0].theta.iter().zip(&w[1].theta).map(|(a, b)| a - b));
            assert!(d < 1e-3, "{d}");
        }
        assert!(out.reports[3].cost.c3 < 1e-6);
    }
}
