//! Shared inputs for the criterion benches.

use humimic_core::binding::{bind, BindingConfig};
use humimic_core::mocap::{parse_bvh_with, write_bvh, BvhOptions};
use humimic_core::retarget::{RetargetConfig, Retargeter};
use humimic_core::{synth, IkMapping, RobotSkeleton, TargetFrame};

/// Self-retarget of the bundled humanoid walking: BVH text, targets and the
/// IK mapping.
pub struct WalkCase {
    pub robot: RobotSkeleton,
    pub bvh: String,
    pub targets: Vec<TargetFrame>,
    pub mapping: IkMapping,
    pub frame_time: f64,
}

pub fn walk_case(frames: usize) -> WalkCase {
    let robot = synth::humanoid();
    let frame_time = 1.0 / 120.0;
    let clip = synth::walk_clip(&robot, frames, frame_time, 1.0);
    let bvh = write_bvh(&robot.skeleton, &clip.sequence(), 0.01);
    let (source, seq) =
        parse_bvh_with(&bvh, &BvhOptions { scale: 0.01 }).expect("generated BVH parses");
    let prim = bind(
        &source,
        &robot,
        &BindingConfig::identity(&synth::key_joint_names(&robot)),
    )
    .expect("identity binding");
    let retargeter =
        Retargeter::new(&source, &prim, &robot, &RetargetConfig::default()).expect("retargeter");
    let targets = retargeter.retarget_sequence(&seq).expect("retarget");
    let mapping = retargeter.mapping();
    WalkCase {
        robot,
        bvh,
        targets,
        mapping,
        frame_time,
    }
}
