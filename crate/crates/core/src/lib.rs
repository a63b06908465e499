//! Motion retargeting and adversarial style-critic training for humanoid
//! imitation.
//!
//! The kinematic pipeline runs mocap → primitive binding → Cartesian targets
//! → whole-body IK → filtered joint-space motion. The learning side provides a
//! small MLP critic with Wasserstein and BCE losses, the style and velocity
//! rewards, and a seeded toy benchmark harness for comparing loss families.

pub mod binding;
pub mod critic;
pub mod error;
pub mod harness;
pub mod ik;
pub mod kinematics;
pub mod mocap;
pub mod postprocess;
pub mod retarget;
pub mod rewards;
pub mod synth;

pub use binding::{bind, BindingConfig, PrimitiveSkeleton};
pub use error::{Error, Result};
pub use ik::{
    effector_errors, solve_frame, solve_sequence, CostBreakdown, IkOptions, IkSolution, IkWeights,
    SequenceSolution,
};
pub use kinematics::{Pose6D, Quat, Transform, Vec3};
pub use mocap::{MotionFrame, MotionSequence, RobotSkeleton, Skeleton};
pub use postprocess::{RobotFrame, RobotMotion};
pub use retarget::{IkMapping, RetargetConfig, Retargeter, TargetFrame};
