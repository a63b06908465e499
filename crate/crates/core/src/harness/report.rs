use std::collections::BTreeMap;
use std::path::Path;

use super::metrics::{median, stability_metrics, Stability};
use super::train::{RunReport, StepRecord};
use crate::critic::LossKind;
use crate::error::Error;

/// Rolling window used for the summary stability columns.
pub const SUMMARY_WINDOW: usize = 50;

pub const SUMMARY_HEADER: [&str; 9] = [
    "loss",
    "seed",
    "steps",
    "diverged",
    "output_range",
    "rolling_std_max",
    "reward_std_max",
    "coverage",
    "tanh_violations",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_run_csv(report: &RunReport, path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(StepRecord::HEADER)
        .map_err(|e| csv_err(path, e))?;
    for s in &report.steps {
        w.write_record(s.fields()).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn coverage_field(r: &RunReport) -> String {
    r.coverage
        .as_ref()
        .map(|c| c.covered.to_string())
        .unwrap_or_default()
}

/// Per-loss medians over seeds, in [`LossKind::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSummary {
    pub loss: LossKind,
    pub runs: usize,
    pub diverged: usize,
    pub stability: Stability,
    pub coverage: Option<f64>,
}

pub fn summarize(reports: &[RunReport], window: usize) -> Vec<LossSummary> {
    let mut by_loss: BTreeMap<usize, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        let idx = LossKind::ALL
            .iter()
            .position(|&k| k == r.loss)
            .unwrap_or(usize::MAX);
        by_loss.entry(idx).or_default().push(r);
    }
    by_loss
        .into_values()
        .map(|runs| {
            let stab: Vec<Stability> = runs.iter().map(|r| stability_metrics(r, window)).collect();
            let pick = |f: fn(&Stability) -> f64| median(&stab.iter().map(f).collect::<Vec<_>>());
            let cov: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.coverage.as_ref().map(|c| c.covered as f64))
                .collect();
            LossSummary {
                loss: runs[0].loss,
                runs: runs.len(),
                diverged: runs.iter().filter(|r| r.diverged).count(),
                stability: Stability {
                    output_range: pick(|s| s.output_range),
                    rolling_std_max: pick(|s| s.rolling_std_max),
                    reward_std_max: pick(|s| s.reward_std_max),
                },
                coverage: (!cov.is_empty()).then(|| median(&cov)),
            }
        })
        .collect()
}

/// One row per run, then one `median` row per loss.
pub fn write_summary_csv(reports: &[RunReport], path: &Path, window: usize) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SUMMARY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in reports {
        let s = stability_metrics(r, window);
        w.write_record([
            r.loss.name().to_string(),
            r.seed.to_string(),
            r.steps.len().to_string(),
            r.diverged.to_string(),
            s.output_range.to_string(),
            s.rolling_std_max.to_string(),
            s.reward_std_max.to_string(),
            coverage_field(r),
            r.tanh_violations.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    for m in summarize(reports, window) {
        w.write_record([
            m.loss.name().to_string(),
            "median".to_string(),
            m.runs.to_string(),
            m.diverged.to_string(),
            m.stability.output_range.to_string(),
            m.stability.rolling_std_max.to_string(),
            m.stability.reward_std_max.to_string(),
            m.coverage.map(|c| c.to_string()).unwrap_or_default(),
            String::new(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<run name>.csv` for every report plus `summary.csv` into `dir`.
pub fn emit_report(reports: &[RunReport], dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in reports {
        write_run_csv(r, &dir.join(format!("{}.csv", r.name())))?;
    }
    write_summary_csv(reports, &dir.join("summary.csv"), SUMMARY_WINDOW)
}
