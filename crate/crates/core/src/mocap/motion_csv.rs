//! Motion CSV: `time,px,py,pz,qw,qx,qy,qz,<θ_1..θ_n>,<θ̇_1..θ̇_n>`, one row
//! per frame, nine digits after the decimal point.
//!
//! Root velocities are not stored; the reader re-derives them from the root
//! poses with [`compute_velocities`](crate::postprocess::compute_velocities).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Quaternion;

use crate::error::{Error, MotionError};
use crate::kinematics::{Pose6D, Quat, Vec3};
use crate::postprocess::{compute_velocities, RobotFrame, RobotMotion};

const POSE_COLUMNS: [&str; 8] = ["time", "px", "py", "pz", "qw", "qx", "qy", "qz"];
const VEL_PREFIX: &str = "vel_";

fn header(motion: &RobotMotion) -> String {
    let mut cols: Vec<String> = POSE_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(motion.joint_names.iter().cloned());
    cols.extend(
        motion
            .joint_names
            .iter()
            .map(|n| format!("{VEL_PREFIX}{n}")),
    );
    cols.join(",")
}

pub fn format_motion(motion: &RobotMotion) -> String {
    let mut out = header(motion);
    out.push('\n');
    for (i, f) in motion.frames.iter().enumerate() {
        let q = f.root.orientation.quaternion();
        let p = f.root.position;
        let mut row = format!(
            "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            i as f64 * motion.frame_time,
            p.x,
            p.y,
            p.z,
            q.w,
            q.i,
            q.j,
            q.k
        );
        for v in f.theta.iter().chain(&f.theta_dot) {
            let _ = write!(row, ",{v:.9}");
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn write_motion(motion: &RobotMotion, path: impl AsRef<Path>) -> Result<(), Error> {
    std::fs::write(path.as_ref(), format_motion(motion)).map_err(|e| Error::io(path, e))
}

pub fn read_motion(
    path: impl AsRef<Path>,
    frame_time_hint: Option<f64>,
) -> Result<RobotMotion, Error> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(parse_motion(&text, frame_time_hint)?)
}

/// Parse a motion CSV. The frame time is recovered from the time column;
/// files with fewer than two rows need `frame_time_hint`.
pub fn parse_motion(text: &str, frame_time_hint: Option<f64>) -> Result<RobotMotion, MotionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MotionError::Csv(e.to_string()))?
        .clone();
    if headers.len() < POSE_COLUMNS.len() || (headers.len() - POSE_COLUMNS.len()) % 2 != 0 {
        return Err(MotionError::Csv(format!(
            "expected 8 + 2n columns, got {}",
            headers.len()
        )));
    }
    for (i, expected) in POSE_COLUMNS.iter().enumerate() {
        if &headers[i] != *expected {
            return Err(MotionError::Csv(format!(
                "column {} must be '{expected}', found '{}'",
                i + 1,
                &headers[i]
            )));
        }
    }
    let n = (headers.len() - POSE_COLUMNS.len()) / 2;
    let joint_names: Vec<String> = (0..n).map(|k| headers[8 + k].to_string()).collect();
    for (k, name) in joint_names.iter().enumerate() {
        let vel = &headers[8 + n + k];
        if vel != format!("{VEL_PREFIX}{name}") {
            return Err(MotionError::Csv(format!(
                "velocity column for '{name}' must be '{VEL_PREFIX}{name}', found '{vel}'"
            )));
        }
    }

    let mut times = Vec::new();
    let mut frames = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| MotionError::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(MotionError::Row {
                row,
                message: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        let values = record
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(MotionError::Row {
                    row,
                    message: format!("non-finite value '{s}'"),
                }),
                Err(_) => Err(MotionError::Row {
                    row,
                    message: format!("invalid number '{s}'"),
                }),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let q = Quaternion::new(values[4], values[5], values[6], values[7]);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(MotionError::Row {
                row,
                message: format!("root quaternion norm {} is not 1", q.norm()),
            });
        }
        times.push(values[0]);
        // keep parsed digits when already unit to within print precision
        let orientation = if (q.norm() - 1.0).abs() <= 1e-8 {
            Quat::new_unchecked(q)
        } else {
            Quat::from_quaternion(q)
        };
        let root = Pose6D::new(Vec3::new(values[1], values[2], values[3]), orientation);
        let mut frame = RobotFrame::at_rest(root, values[8..8 + n].to_vec());
        frame.theta_dot = values[8 + n..].to_vec();
        frames.push(frame);
    }

    let frame_time = if times.len() >= 2 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 {
                return Err(MotionError::Row {
                    row: i + 3,
                    message: "time column is not uniformly spaced".into(),
                });
            }
        }
        dt
    } else {
        frame_time_hint.ok_or_else(|| {
            MotionError::Invalid("cannot infer frame time from fewer than 2 rows".into())
        })?
    };
    if !(frame_time > 0.0) {
        return Err(MotionError::Invalid(format!(
            "frame time must be positive, got {frame_time}"
        )));
    }

    let motion = RobotMotion {
        frame_time,
        joint_names,
        frames,
    };
    if motion.frames.len() >= 2 {
        let derived = compute_velocities(&motion)?;
        Ok(RobotMotion {
            frames: motion
                .frames
                .into_iter()
                .zip(derived.frames)
                .map(|(f, d)| RobotFrame {
                    root_linear_velocity: d.root_linear_velocity,
                    root_angular_velocity: d.root_angular_velocity,
                    ..f
                })
                .collect(),
            ..motion
        })
    } else {
        Ok(motion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Axis;
    use proptest::prelude::*;

    fn motion(frames: usize) -> RobotMotion {
        let mut m = RobotMotion::new(1.0 / 120.0, vec!["hip".into(), "knee".into()]);
        for i in 0..frames {
            let t = i as f64 * m.frame_time;
            let root = Pose6D::new(Vec3::new(t, 0.1, 0.9), Axis::Z.rotation(t));
            let mut f = RobotFrame::at_rest(root, vec![t.sin(), -t]);
            f.theta_dot = vec![t.cos(), -1.0];
            m.frames.push(f);
        }
        m
    }

    #[test]
    fn empty_motion_is_header_only() {
        let text = format_motion(&motion(0));
        assert_eq!(text.lines().count(), 1);
        assert_eq!(
            text.trim_end(),
            "time,px,py,pz,qw,qx,qy,qz,hip,knee,vel_hip,vel_knee"
        );
    }

    #[test]
    fn single_frame_is_two_lines() {
        let m = motion(1);
        let text = format_motion(&m);
        assert_eq!(text.lines().count(), 2);
        assert!(parse_motion(&text, None).is_err());
        let back = parse_motion(&text, Some(m.frame_time)).unwrap();
        assert_eq!(back.len(), 1);
    }

    fn assert_close(a: &RobotMotion, b: &RobotMotion) {
        assert!((a.frame_time - b.frame_time).abs() <= 1e-9);
        assert_eq!(a.joint_names, b.joint_names);
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert!((x.root.position - y.root.position).amax() <= 1e-9);
            assert!((x.root.orientation.coords - y.root.orientation.coords).amax() <= 1e-9);
            for (p, q) in x
                .theta
                .iter()
                .chain(&x.theta_dot)
                .zip(y.theta.iter().chain(&y.theta_dot))
            {
                assert!((p - q).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn write_read_round_trip() {
        let m = motion(30);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_motion(&m, &path).unwrap();
        assert_close(&m, &read_motion(&path, None).unwrap());
    }

    proptest! {
        #[test]
        fn round_trip_within_tolerance(
            thetas in proptest::collection::vec((-3.2f64..3.2, -40.0f64..40.0, -1.0f64..1.0, -1.0f64..1.0), 2..20),
            dt in 0.001f64..0.1,
        ) {
            let dt = (dt * 1e6).round() / 1e6;
            let mut m = RobotMotion::new(dt, vec!["j".into()]);
            for (th, vel, x, yaw) in &thetas {
                let mut f = RobotFrame::at_rest(Pose6D::new(Vec3::new(*x, -x, 1.0), Axis::Z.rotation(yaw * 3.0)), vec![*th]);
                f.theta_dot = vec![*vel];
                m.frames.push(f);
            }
            let back = parse_motion(&format_motion(&m), None).unwrap();
            prop_assert!((back.frame_time - m.frame_time).abs() <= 1e-9);
            for (a, b) in m.frames.iter().zip(&back.frames) {
                prop_assert!((a.theta[0] - b.theta[0]).abs() <= 1e-9);
                prop_assert!((a.theta_dot[0] - b.theta_dot[0]).abs() <= 1e-9);
                prop_assert!((a.root.position - b.root.position).amax() <= 1e-9);
                prop_assert!((a.root.orientation.coords - b.root.orientation.coords).amax() <= 1e-9);
            }
        }
    }
}
