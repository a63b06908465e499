use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis as NdAxis};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::critic::{transition_matrix, FeatureStats};
use crate::error::Error;
use crate::mocap::{parse_robot_skeleton, read_motion, RobotSkeleton};
use crate::postprocess::RobotMotion;
use crate::synth::{self, Gait};

/// Standard deviation of every toy mixture component.
pub const MIXTURE_SIGMA: f64 = 0.05;

/// Clip selection probability per reference motion class.
pub const SELECTION_PROBABILITY: [(Gait, f64); 4] = [
    (Gait::Stand, 0.15),
    (Gait::Squat, 0.20),
    (Gait::Walk, 0.35),
    (Gait::Run, 0.30),
];

pub fn selection_probability(gait: Gait) -> f64 {
    SELECTION_PROBABILITY
        .iter()
        .find(|(g, _)| *g == gait)
        .map(|(_, p)| *p)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    Gauss2,
    Ring8,
    MotionFeatures(PathBuf),
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::Gauss2 => "gauss2",
            DatasetSpec::Ring8 => "ring8",
            DatasetSpec::MotionFeatures(_) => "motion_features",
        }
    }

    /// `gauss2`, `ring8`, or `motion_features:<manifest path>`.
    pub fn parse(text: &str) -> Result<Self, Error> {
        match text {
            "gauss2" => Ok(DatasetSpec::Gauss2),
            "ring8" => Ok(DatasetSpec::Ring8),
            _ => match text.strip_prefix("motion_features:") {
                Some(path) if !path.is_empty() => Ok(DatasetSpec::MotionFeatures(path.into())),
                _ => Err(Error::Config(format!("unknown dataset '{text}'"))),
            },
        }
    }
}

/// Isotropic Gaussian mixture with equal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
}

impl Mixture {
    pub fn gauss2() -> Self {
        Self {
            centers: vec![[2.0, 0.0], [-2.0, 0.0]],
            sigma: MIXTURE_SIGMA,
        }
    }

    /// Center `k` at angle `k·45°` on the radius-2 circle.
    pub fn ring8() -> Self {
        let centers = (0..8).map(|k| {
            let a = TAU * k as f64 / 8.0;
            [2.0 * a.cos(), 2.0 * a.sin()]
        });
        Self {
            centers: centers.collect(),
            sigma: MIXTURE_SIGMA,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::zeros((n, 2));
        for mut row in out.rows_mut() {
            let c = self.centers[rng.gen_range(0..self.centers.len())];
            for (k, v) in row.iter_mut().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                *v = c[k] + self.sigma * e;
            }
        }
        out
    }
}

/// Normalized transition features grouped by clip.
#[derive(Debug, Clone)]
pub struct MotionDataset {
    pub clips: Vec<Array2<f64>>,
    pub weights: Vec<f64>,
    pub stats: FeatureStats,
    selector: WeightedIndex<f64>,
}

impl MotionDataset {
    /// Clips of the same class split that class's probability evenly. Every
    /// row is normalized with statistics over all clips, frozen here.
    pub fn from_motions(
        robot: &RobotSkeleton,
        clips: &[(Gait, RobotMotion)],
        n: usize,
    ) -> Result<Self, Error> {
        if clips.is_empty() {
            return Err(Error::Config(
                "motion dataset needs at least one clip".into(),
            ));
        }
        let mut rows = Vec::with_capacity(clips.len());
        for (_, motion) in clips {
            rows.push(transition_matrix(motion, robot, n)?);
        }
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        let all =
            ndarray::concatenate(NdAxis(0), &views).map_err(|e| Error::Config(e.to_string()))?;
        let stats = FeatureStats::from_rows(&all)?;
        for r in rows.iter_mut() {
            stats.normalize(r)?;
        }
        let weights: Vec<f64> = clips
            .iter()
            .map(|(g, _)| {
                selection_probability(*g) / clips.iter().filter(|(h, _)| h == g).count() as f64
            })
            .collect();
        let selector = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("clip weights: {e}")))?;
        Ok(Self {
            clips: rows,
            weights,
            stats,
            selector,
        })
    }

    /// Stand-in reference set built from the synthetic gaits.
    pub fn synthetic(
        robot: &RobotSkeleton,
        frames: usize,
        frame_time: f64,
        n: usize,
    ) -> Result<Self, Error> {
        let clips: Vec<_> = Gait::ALL
            .iter()
            .map(|&g| {
                (
                    g,
                    synth::gait_clip(robot, g, frames, frame_time, 1.0, 0.0).robot_motion(robot),
                )
            })
            .collect();
        Self::from_motions(robot, &clips, n)
    }

    /// Loads a manifest (see [`MotionManifest`]); relative paths resolve
    /// against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: MotionManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let robot = match &manifest.robot {
            Some(p) => {
                let p = dir.join(p);
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                parse_robot_skeleton(&text)?
            }
            None => synth::humanoid(),
        };
        let mut clips = Vec::with_capacity(manifest.clips.len());
        for c in &manifest.clips {
            let gait = Gait::from_name(&c.gait)
                .ok_or_else(|| Error::Config(format!("unknown motion class '{}'", c.gait)))?;
            clips.push((gait, read_motion(dir.join(&c.path), None)?));
        }
        Self::from_motions(&robot, &clips, manifest.n)
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.rows_mut() {
            let clip = &self.clips[self.selector.sample(rng)];
            row.assign(&clip.row(rng.gen_range(0..clip.nrows())));
        }
        out
    }
}

/// Manifest for `motion_features` datasets:
/// `{"robot": "robot.json", "n": 2, "clips": [{"gait": "walk", "path": "walk.csv"}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionManifest {
    #[serde(default)]
    pub robot: Option<PathBuf>,
    #[serde(default = "default_n")]
    pub n: usize,
    pub clips: Vec<ManifestClip>,
}

fn default_n() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClip {
    pub gait: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub enum Dataset {
    Mixture(Mixture),
    Motion(MotionDataset),
}

impl Dataset {
    pub fn dim(&self) -> usize {
        match self {
            Dataset::Mixture(_) => 2,
            Dataset::Motion(m) => m.dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        match self {
            Dataset::Mixture(m) => m.sample(n, rng),
            Dataset::Motion(m) => m.sample(n, rng),
        }
    }

    pub fn mixture(&self) -> Option<&Mixture> {
        match self {
            Dataset::Mixture(m) => Some(m),
            Dataset::Motion(_) => None,
        }
    }
}

pub fn make_dataset(spec: &DatasetSpec) -> Result<Dataset, Error> {
    Ok(match spec {
        DatasetSpec::Gauss2 => Dataset::Mixture(Mixture::gauss2()),
        DatasetSpec::Ring8 => Dataset::Mixture(Mixture::ring8()),
        DatasetSpec::MotionFeatures(path) => Dataset::Motion(MotionDataset::load(path)?),
    })
}
