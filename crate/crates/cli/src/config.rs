use std::path::{Path, PathBuf};

use humimic_core::critic::LossConfig;
use humimic_core::harness::BenchmarkSpec;
use humimic_core::{IkOptions, IkWeights, RetargetConfig};
use serde::{Deserialize, Serialize};

use crate::fail::{input, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FilterOrder {
    /// Smooth the Cartesian targets before the solve.
    Pre,
    /// Smooth the solved joint trajectory.
    #[default]
    Post,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub bvh: Option<PathBuf>,
    pub robot: Option<PathBuf>,
    pub binding: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkSection {
    pub weights: IkWeights,
    pub options: IkOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostSection {
    /// EMA factor; `None` disables smoothing.
    pub alpha: Option<f64>,
    pub filter_order: FilterOrder,
    /// Output frame rate; `None` keeps the source rate.
    pub fps: Option<f64>,
    /// BVH units to meters.
    pub scale: f64,
}

impl Default for PostSection {
    fn default() -> Self {
        Self {
            alpha: None,
            filter_order: FilterOrder::Post,
            fps: None,
            scale: 0.01,
        }
    }
}

/// Everything a command may read from `--config`. Command-line flags win.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub retarget: RetargetConfig,
    pub ik: IkSection,
    pub postprocess: PostSection,
    pub loss: LossConfig,
    pub bench: BenchmarkSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: Paths::default(),
            retarget: RetargetConfig {
                source_axes: humimic_core::retarget::SourceAxes::YUp,
                ..Default::default()
            },
            ik: IkSection::default(),
            postprocess: PostSection::default(),
            loss: LossConfig::new(humimic_core::critic::LossKind::W1Soft),
            bench: BenchmarkSpec::default(),
        }
    }
}

impl PipelineConfig {
    /// Relative paths inside the file resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| input(format!("invalid config {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.bvh,
            &mut cfg.paths.robot,
            &mut cfg.paths.binding,
            &mut cfg.paths.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        if let humimic_core::harness::DatasetSpec::MotionFeatures(p) = &mut cfg.bench.dataset {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}
