use thiserror::Error;

/// Errors raised while building or querying skeletons and running FK.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("joint index {index} out of range for {len} joints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
}

/// BVH parse failure, always tied to a 1-based source line.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct BvhError {
    pub line: usize,
    pub kind: BvhErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvhErrorKind {
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("unexpected token '{found}', expected {expected}")]
    UnexpectedToken { found: String, expected: String },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEof(String),
    #[error("invalid number '{0}'")]
    InvalidNumber(String),
    #[error("non-finite value '{0}'")]
    NonFinite(String),
    #[error("unsupported channel '{0}'")]
    UnsupportedChannel(String),
    #[error("frame count mismatch: declared {declared}, found {found}")]
    FrameCountMismatch { declared: usize, found: usize },
    #[error("frame has {found} values, expected {expected}")]
    ChannelCountMismatch { expected: usize, found: usize },
    #[error("frame time must be positive, got {0}")]
    InvalidFrameTime(f64),
    #[error("duplicate joint name '{0}'")]
    DuplicateJoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobotError {
    #[error("malformed robot description: {0}")]
    Json(String),
    #[error("unknown parent '{parent}' for joint '{joint}'")]
    UnknownParent { joint: String, parent: String },
    #[error("joint '{0}' declared twice")]
    DuplicateJoint(String),
    #[error("robot must have exactly one root joint, found {0}")]
    RootCount(usize),
    #[error("joint '{joint}': {which} limit inverted ({lo} > {hi})")]
    LimitInversion {
        joint: String,
        which: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("joint '{joint}': velocity limits [{lo}, {hi}] must bracket zero")]
    VelocityBracket { joint: String, lo: f64, hi: f64 },
    #[error("joint '{joint}': non-unit axis (norm {norm})")]
    NonUnitAxis { joint: String, norm: f64 },
    #[error("joint '{joint}': limits given without an axis")]
    LimitsWithoutAxis { joint: String },
    #[error("joint '{joint}': non-finite value in {field}")]
    NonFinite { joint: String, field: &'static str },
    #[error("unknown joint '{0}' referenced")]
    UnknownJoint(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BindError {
    #[error("malformed binding config: {0}")]
    Json(String),
    #[error("binding needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("unknown {side} joint '{name}'")]
    UnknownJoint { side: &'static str, name: String },
    #[error("{side} joint '{name}' used in more than one pair")]
    DuplicateJoint { side: &'static str, name: String },
    #[error(
        "{side} key joints do not form a single tree: '{a}' and '{b}' have no common key ancestor"
    )]
    Forest {
        side: &'static str,
        a: String,
        b: String,
    },
    #[error("{side} skeleton root '{root}' must be a key joint")]
    RootNotKey { side: &'static str, root: String },
    #[error("topology mismatch at pair ('{source_joint}', '{target_joint}'): key parents differ")]
    TopologyMismatch {
        source_joint: String,
        target_joint: String,
    },
    #[error("degenerate bone ending at pair ('{source_joint}', '{target_joint}'): lengths {source_length} / {target_length}")]
    DegenerateBone {
        source_joint: String,
        target_joint: String,
        source_length: f64,
        target_length: f64,
    },
    #[error("end effector '{0}' is not a key joint of the binding")]
    EffectorNotKey(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("motion csv: {0}")]
    Csv(String),
    #[error("motion csv row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticError {
    #[error("input dimension mismatch: network expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("index {index} + {n} out of range for motion with {len} frames")]
    OutOfRange { index: usize, n: usize, len: usize },
}

/// Crate-wide error for APIs that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Bvh(#[from] BvhError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error("{0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
