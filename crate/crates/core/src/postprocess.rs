//! Finite-difference velocities, frame-rate resampling and EMA smoothing of
//! solved robot motions.

use serde::{Deserialize, Serialize};

use crate::error::MotionError;
use crate::kinematics::{orientation_error, slerp, Pose6D, Quat, Vec3};
use crate::retarget::TargetFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFrame {
    pub root: Pose6D,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    /// World frame, m/s.
    pub root_linear_velocity: Vec3,
    /// World frame, rad/s.
    pub root_angular_velocity: Vec3,
}

impl RobotFrame {
    pub fn at_rest(root: Pose6D, theta: Vec<f64>) -> Self {
        let n = theta.len();
        Self {
            root,
            theta,
            theta_dot: vec![0.0; n],
            root_linear_velocity: Vec3::zeros(),
            root_angular_velocity: Vec3::zeros(),
        }
    }
}

/// Joint-space robot motion at a fixed frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMotion {
    pub frame_time: f64,
    pub joint_names: Vec<String>,
    pub frames: Vec<RobotFrame>,
}

impl RobotMotion {
    pub fn new(frame_time: f64, joint_names: Vec<String>) -> Self {
        Self {
            frame_time,
            joint_names,
            frames: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.joint_names.len()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 * self.frame_time
    }
}

fn central(prev: f64, next: f64, span: f64) -> f64 {
    (next - prev) / span
}

/// Velocities by central differences in the interior and one-sided
/// differences at both ends.
pub fn compute_velocities(motion: &RobotMotion) -> Result<RobotMotion, MotionError> {
    let n = motion.frames.len();
    if n < 2 {
        return Err(MotionError::Invalid(format!(
            "velocities need at least 2 frames, got {n}"
        )));
    }
    let dt = motion.frame_time;
    let mut out = motion.clone();
    for t in 0..n {
        let (a, b) = match t {
            0 => (0, 1),
            t if t == n - 1 => (n - 2, n - 1),
            t => (t - 1, t + 1),
        };
        let span = (b - a) as f64 * dt;
        let (fa, fb) = (&motion.frames[a], &motion.frames[b]);
        let frame = &mut out.frames[t];
        frame.theta_dot = fa
            .theta
            .iter()
            .zip(&fb.theta)
            .map(|(x0, x1)| central(*x0, *x1, span))
            .collect();
        frame.root_linear_velocity = (fb.root.position - fa.root.position) / span;
        frame.root_angular_velocity =
            orientation_error(&fb.root.orientation, &fa.root.orientation) / span;
    }
    Ok(out)
}

fn lerp(a: f64, b: f64, u: f64) -> f64 {
    a + (b - a) * u
}

fn lerp_vec(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| lerp(*x, *y, u)).collect()
}

fn interpolate(a: &RobotFrame, b: &RobotFrame, u: f64) -> RobotFrame {
    RobotFrame {
        root: Pose6D {
            position: a.root.position.lerp(&b.root.position, u),
            orientation: slerp(&a.root.orientation, &b.root.orientation, u),
        },
        theta: lerp_vec(&a.theta, &b.theta, u),
        theta_dot: lerp_vec(&a.theta_dot, &b.theta_dot, u),
        root_linear_velocity: a.root_linear_velocity.lerp(&b.root_linear_velocity, u),
        root_angular_velocity: a.root_angular_velocity.lerp(&b.root_angular_velocity, u),
    }
}

/// Resample to `new_frame_time`: linear interpolation for positions, angles
/// and velocities, slerp for orientations. The first frame is kept exactly;
/// the last one too whenever the duration is a multiple of the new period.
pub fn resample(motion: &RobotMotion, new_frame_time: f64) -> Result<RobotMotion, MotionError> {
    if !(new_frame_time > 0.0) || !new_frame_time.is_finite() {
        return Err(MotionError::Invalid(format!(
            "frame time must be positive, got {new_frame_time}"
        )));
    }
    let n = motion.frames.len();
    let mut out = RobotMotion::new(new_frame_time, motion.joint_names.clone());
    if n == 0 {
        return Ok(out);
    }
    let duration = motion.duration();
    let count = (duration / new_frame_time + 1e-9).floor() as usize + 1;
    out.frames.reserve(count);
    for i in 0..count {
        // position in source frames, snapped so exact multiples hit frames exactly
        let mut u = i as f64 * new_frame_time / motion.frame_time;
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        let k = (u.floor() as usize).min(n - 1);
        let frac = u - k as f64;
        let frame = if k == n - 1 || frac == 0.0 {
            motion.frames[k].clone()
        } else {
            interpolate(&motion.frames[k], &motion.frames[k + 1], frac)
        };
        out.frames.push(frame);
    }
    Ok(out)
}

fn check_alpha(alpha: f64) -> Result<(), MotionError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(MotionError::Invalid(format!(
            "EMA alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

fn ema_into(y: &mut [f64], x: &[f64], alpha: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = alpha * xi + (1.0 - alpha) * *yi;
    }
}

fn ema_vec3(y: &Vec3, x: &Vec3, alpha: f64) -> Vec3 {
    x * alpha + y * (1.0 - alpha)
}

fn ema_quat(y: &Quat, x: &Quat, alpha: f64) -> Quat {
    // slerp renormalizes
    slerp(x, y, 1.0 - alpha)
}

/// Forward exponential moving average `y_t = α x_t + (1 − α) y_{t−1}` over
/// every position and velocity channel; orientations are slerped toward the
/// previous output by `1 − α`.
pub fn ema_filter(motion: &RobotMotion, alpha: f64) -> Result<RobotMotion, MotionError> {
    check_alpha(alpha)?;
    let mut out = motion.clone();
    for t in 1..out.frames.len() {
        let (done, rest) = out.frames.split_at_mut(t);
        let prev = &done[t - 1];
        let cur = &mut rest[0];
        let mut theta = prev.theta.clone();
        ema_into(&mut theta, &cur.theta, alpha);
        let mut theta_dot = prev.theta_dot.clone();
        ema_into(&mut theta_dot, &cur.theta_dot, alpha);
        *cur = RobotFrame {
            root: Pose6D {
                position: ema_vec3(&prev.root.position, &cur.root.position, alpha),
                orientation: ema_quat(&prev.root.orientation, &cur.root.orientation, alpha),
            },
            theta,
            theta_dot,
            root_linear_velocity: ema_vec3(
                &prev.root_linear_velocity,
                &cur.root_linear_velocity,
                alpha,
            ),
            root_angular_velocity: ema_vec3(
                &prev.root_angular_velocity,
                &cur.root_angular_velocity,
                alpha,
            ),
        };
    }
    Ok(out)
}

/// The same filter applied to Cartesian IK goals, for smoothing before the
/// solve instead of after it.
pub fn ema_filter_targets(
    targets: &[TargetFrame],
    alpha: f64,
) -> Result<Vec<TargetFrame>, MotionError> {
    check_alpha(alpha)?;
    let mut out: Vec<TargetFrame> = Vec::with_capacity(targets.len());
    for cur in targets {
        let Some(prev) = out.last() else {
            out.push(cur.clone());
            continue;
        };
        let mut next = cur.clone();
        next.root_position = ema_vec3(&prev.root_position, &cur.root_position, alpha);
        next.root_orientation = ema_quat(&prev.root_orientation, &cur.root_orientation, alpha);
        for (n, p) in next.key_positions.iter_mut().zip(&prev.key_positions) {
            *n = ema_vec3(p, n, alpha);
        }
        for (n, p) in next.ee_poses.iter_mut().zip(&prev.ee_poses) {
            n.pose.position = ema_vec3(&p.pose.position, &n.pose.position, alpha);
            n.pose.orientation = ema_quat(&p.pose.orientation, &n.pose.orientation, alpha);
        }
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{angle_between, Axis};
    use approx::assert_relative_eq;

    fn ramp(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> RobotMotion {
        let mut m = RobotMotion::new(dt, vec!["a".into(), "b".into()]);
        for i in 0..n {
            let t = i as f64 * dt;
            let root = Pose6D::new(Vec3::new(f(t), 0.0, 1.0), Axis::Z.rotation(0.5 * t));
            m.frames
                .push(RobotFrame::at_rest(root, vec![f(t), -2.0 * f(t)]));
        }
        m
    }

    #[test]
    fn constant_motion_has_zero_velocity() {
        let m = compute_velocities(&ramp(5, 0.1, |_| 0.7)).unwrap();
        for f in &m.frames {
            assert!(f.theta_dot.iter().all(|v| v.abs() < 1e-12));
            assert!(f.root_linear_velocity.norm() < 1e-12);
        }
    }

    #[test]
    fn linear_ramp_is_exact_everywhere() {
        let m = compute_velocities(&ramp(7, 0.05, |t| 3.0 * t)).unwrap();
        for f in &m.frames {
            assert_relative_eq!(f.theta_dot[0], 3.0, epsilon = 1e-9);
            assert_relative_eq!(f.theta_dot[1], -6.0, epsilon = 1e-9);
            assert_relative_eq!(f.root_linear_velocity.x, 3.0, epsilon = 1e-9);
            assert_relative_eq!(
                f.root_angular_velocity,
                Vec3::new(0.0, 0.0, 0.5),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn quadratic_interior_error_is_second_order() {
        // d/dt t² = 2t; central differences are exact for quadratics, and the
        // one-sided ends are off by exactly Δt.
        let dt = 0.01;
        let m = compute_velocities(&ramp(50, dt, |t| t * t)).unwrap();
        for (i, f) in m.frames.iter().enumerate() {
            let t = i as f64 * dt;
            let err = (f.theta_dot[0] - 2.0 * t).abs();
            if i == 0 || i == 49 {
                assert_relative_eq!(err, dt, epsilon = 1e-9);
            } else {
                assert!(err <= dt * dt, "frame {i}: {err}");
            }
        }
    }

    #[test]
    fn single_frame_is_an_error() {
        assert!(compute_velocities(&ramp(1, 0.1, |t| t)).is_err());
    }

    #[test]
    fn resample_identity_and_upsample() {
        let m = ramp(6, 0.1, |t| 2.0 * t);
        assert_eq!(resample(&m, 0.1).unwrap(), m);
        let up = resample(&m, 0.05).unwrap();
        assert_eq!(up.len(), 11);
        for (i, f) in up.frames.iter().enumerate() {
            assert_relative_eq!(f.theta[0], 2.0 * 0.05 * i as f64, epsilon = 1e-12);
        }
        assert_eq!(up.frames.first(), m.frames.first());
        assert_eq!(up.frames.last(), m.frames.last());
        let mid = &up.frames[1];
        assert!(angle_between(&mid.root.orientation, &Axis::Z.rotation(0.025)) < 1e-12);
    }

    #[test]
    fn resample_keeps_duration_within_one_frame() {
        let m = ramp(120, 1.0 / 120.0, |t| t.sin());
        let down = resample(&m, 1.0 / 30.0).unwrap();
        assert!((down.duration() - m.duration()).abs() <= down.frame_time);
        assert!(resample(&m, 0.0).is_err());
    }

    #[test]
    fn ema_identity_constant_and_impulse() {
        let m = ramp(10, 0.1, |t| t.cos());
        assert_eq!(ema_filter(&m, 1.0).unwrap(), m);
        let c = ramp(10, 0.1, |_| 0.3);
        let fc = ema_filter(&c, 0.2).unwrap();
        for (a, b) in fc.frames.iter().zip(&c.frames) {
            assert_relative_eq!(a.theta[0], b.theta[0], epsilon = 1e-15);
        }

        let mut imp = ramp(10, 0.1, |_| 0.0);
        imp.frames[3].theta[0] = 1.0;
        let out = ema_filter(&imp, 0.5).unwrap();
        for (t, f) in out.frames.iter().enumerate() {
            let expected = if t < 3 {
                0.0
            } else {
                0.5 * 0.5f64.powi(t as i32 - 3)
            };
            assert_relative_eq!(f.theta[0], expected, epsilon = 1e-15);
        }
        assert!(ema_filter(&m, 0.0).is_err());
        assert!(ema_filter(&m, 1.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn ema_never_widens_deviation(values in proptest::collection::vec(-5.0f64..5.0, 2..40), alpha in 0.01f64..=1.0) {
            let mut m = RobotMotion::new(0.1, vec!["a".into()]);
            for v in &values {
                m.frames.push(RobotFrame::at_rest(Pose6D::identity(), vec![*v]));
            }
            let out = ema_filter(&m, alpha).unwrap();
            for c in [-1.0, 0.0, 2.5] {
                let before = values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
                let after = out.frames.iter().map(|f| (f.theta[0] - c).abs()).fold(0.0, f64::max);
                proptest::prop_assert!(after <= before + 1e-12);
            }
            for f in &out.frames {
                proptest::prop_assert!((f.root.orientation.quaternion().norm() - 1.0).abs() < 1e-9);
            }
        }
    }
}
