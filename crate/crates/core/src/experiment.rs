//! Paired learning curves: flat vs hierarchical over growing training sets.
//!
//! For every training size and repeat a single random subsample is drawn and
//! both models are fit on it with the same seed, then scored on the fixed test
//! set. Cells run on the rayon pool; results are collected in (size, repeat)
//! order so the output never depends on scheduling.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{subsample_train, Dataset, DatasetError};
use crate::derive_seed;
use crate::hier::{fit_flat, fit_lcpn, HierError};
use crate::metrics::{HierAveraging, MetricsError, MetricsReport};
use crate::mlp::TrainConfig;
use crate::tree::LabelTree;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid curve config: {0}")]
    InvalidConfig(String),
    #[error("test point ({image_id}, {point_id}) also appears in the training set")]
    NotDisjoint { image_id: String, point_id: u32 },
    #[error("results file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] HierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::InvalidConfig(_) => "E_CURVE_INVALID_CONFIG",
            ExperimentError::NotDisjoint { .. } => "E_CURVE_NOT_DISJOINT",
            ExperimentError::Parse { .. } => "E_CURVE_PARSE",
            ExperimentError::Dataset(e) => e.code(),
            ExperimentError::Model(e) => e.code(),
            ExperimentError::Metrics(e) => e.code(),
            ExperimentError::Io(_) => "E_IO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Flat,
    Hierarchical,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Flat => "flat",
            ModelKind::Hierarchical => "hierarchical",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flat" => Ok(ModelKind::Flat),
            "hierarchical" => Ok(ModelKind::Hierarchical),
            _ => Err(format!("unknown model {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMetric {
    MacroF1,
    MicroF1,
    WeightedF1,
    HPrecision,
    HRecall,
    HF1,
}

impl CurveMetric {
    pub const ALL: [CurveMetric; 6] = [
        CurveMetric::MacroF1,
        CurveMetric::MicroF1,
        CurveMetric::WeightedF1,
        CurveMetric::HPrecision,
        CurveMetric::HRecall,
        CurveMetric::HF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveMetric::MacroF1 => "macro_f1",
            CurveMetric::MicroF1 => "micro_f1",
            CurveMetric::WeightedF1 => "weighted_f1",
            CurveMetric::HPrecision => "h_precision",
            CurveMetric::HRecall => "h_recall",
            CurveMetric::HF1 => "h_f1",
        }
    }

    pub fn value(self, r: &MetricsReport) -> f64 {
        match self {
            CurveMetric::MacroF1 => r.flat.macro_f1,
            CurveMetric::MicroF1 => r.flat.micro_f1,
            CurveMetric::WeightedF1 => r.flat.weighted_f1,
            CurveMetric::HPrecision => r.hier.h_precision,
            CurveMetric::HRecall => r.hier.h_recall,
            CurveMetric::HF1 => r.hier.h_f1,
        }
    }
}

impl FromStr for CurveMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CurveMetric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub train_sizes: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
    pub train_config: TrainConfig,
    pub metrics: Vec<CurveMetric>,
    pub averaging: HierAveraging,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl CurveConfig {
    pub fn new(train_sizes: Vec<usize>, repeats: usize, base_seed: u64) -> Self {
        CurveConfig {
            train_sizes,
            repeats,
            base_seed,
            train_config: TrainConfig::default(),
            metrics: vec![CurveMetric::MacroF1, CurveMetric::MicroF1, CurveMetric::HF1],
            averaging: HierAveraging::Pooled,
            threads: None,
        }
    }

    /// Default size grid: 5 log-spaced sizes from 250 to `min(n_train, 16000)`.
    pub fn default_sizes(n_train: usize) -> Vec<usize> {
        let hi = n_train.min(16_000);
        let lo = 250.min(hi);
        let steps = 5;
        let mut sizes: Vec<usize> = (0..steps)
            .map(|i| {
                let t = i as f64 / (steps - 1) as f64;
                ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as usize
            })
            .map(|s| s.clamp(lo, hi))
            .collect();
        sizes.dedup();
        sizes
    }

    /// Seed of the (size, repeat) cell; used for both the subsample and training.
    pub fn cell_seed(&self, train_size: usize, repeat: usize) -> u64 {
        derive_seed(derive_seed(self.base_seed, train_size as u64), repeat as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model: ModelKind,
    pub train_size: usize,
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub std: f64,
    pub repeats: usize,
}

/// Outcome of one (size, repeat) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub train_size: usize,
    pub repeat: usize,
    pub seed: u64,
    /// Digest of the subsample both models were trained on.
    pub subsample_digest: String,
    pub flat: Vec<f64>,
    pub hier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub metrics: Vec<CurveMetric>,
    pub points: Vec<CurvePoint>,
    pub cells: Vec<CellResult>,
}

impl LearningCurve {
    /// Per-repeat `hier - flat` differences for one metric at one size.
    pub fn paired_gains(&self, metric: CurveMetric, train_size: usize) -> Vec<f64> {
        let Some(m) = self.metrics.iter().position(|&x| x == metric) else {
            return Vec::new();
        };
        self.cells
            .iter()
            .filter(|c| c.train_size == train_size)
            .map(|c| c.hier[m] - c.flat[m])
            .collect()
    }

    pub fn point(&self, model: ModelKind, train_size: usize, metric: CurveMetric) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| p.model == model && p.train_size == train_size && p.metric == metric.name())
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_config(train: &Dataset, test: &Dataset, config: &CurveConfig) -> Result<(), ExperimentError> {
    let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
    if config.train_sizes.is_empty() {
        return bad("no training sizes".into());
    }
    if config.train_sizes.contains(&0) || config.train_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return bad("training sizes must be positive and strictly ascending".into());
    }
    if let Some(&max) = config.train_sizes.last() {
        if max > train.len() {
            return bad(format!("size {max} exceeds the {} training samples", train.len()));
        }
    }
    if config.repeats == 0 {
        return bad("repeats must be at least 1".into());
    }
    if config.metrics.is_empty() {
        return bad("no metrics selected".into());
    }
    if test.is_empty() {
        return bad("test set is empty".into());
    }
    let keys: HashSet<(&str, u32)> = train
        .samples()
        .iter()
        .map(|s| (s.image_id.as_str(), s.point_id))
        .collect();
    if let Some(s) = test
        .samples()
        .iter()
        .find(|s| keys.contains(&(s.image_id.as_str(), s.point_id)))
    {
        return Err(ExperimentError::NotDisjoint {
            image_id: s.image_id.clone(),
            point_id: s.point_id,
        });
    }
    Ok(())
}

fn run_cell(
    tree: &LabelTree,
    train: &Dataset,
    test: &Dataset,
    config: &CurveConfig,
    train_size: usize,
    repeat: usize,
) -> Result<CellResult, ExperimentError> {
    let seed = config.cell_seed(train_size, repeat);
    let sub = subsample_train(train, train_size, seed)?;
    let digest = sub.digest();
    log::info!("cell size={train_size} repeat={repeat} seed={seed} subsample={digest}");
    let cfg = TrainConfig {
        seed,
        ..config.train_config.clone()
    };
    let x = test.feature_matrix();
    let truth = test.labels();

    let flat = fit_flat(tree, &sub, &cfg)?;
    let flat_pred: Vec<&str> = flat.predict_batch(x.view())?.into_iter().map(|l| tree.name(l)).collect();
    let hier = fit_lcpn(tree, &sub, &cfg)?;
    let hier_pred: Vec<&str> = hier
        .predict_batch(x.view())?
        .into_iter()
        .map(|p| tree.name(p.leaf))
        .collect();

    let score = |pred: &[&str]| -> Result<Vec<f64>, ExperimentError> {
        let r = MetricsReport::evaluate(tree, &truth, pred, None, config.averaging)?;
        Ok(config.metrics.iter().map(|m| m.value(&r)).collect())
    };
    Ok(CellResult {
        train_size,
        repeat,
        seed,
        subsample_digest: digest,
        flat: score(&flat_pred)?,
        hier: score(&hier_pred)?,
    })
}

/// Runs every (size, repeat) cell and aggregates mean and population std per
/// (model, size, metric).
pub fn run_learning_curve(
    tree: &LabelTree,
    train: &Dataset,
    test: &Dataset,
    config: &CurveConfig,
) -> Result<LearningCurve, ExperimentError> {
    check_config(train, test, config)?;
    let jobs: Vec<(usize, usize)> = config
        .train_sizes
        .iter()
        .flat_map(|&s| (0..config.repeats).map(move |r| (s, r)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(s, r)| run_cell(tree, train, test, config, s, r))
            .collect::<Result<Vec<_>, _>>()
    };
    let cells = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let mut points = Vec::new();
    for &size in &config.train_sizes {
        let row: Vec<&CellResult> = cells.iter().filter(|c| c.train_size == size).collect();
        for model in [ModelKind::Flat, ModelKind::Hierarchical] {
            for (m, metric) in config.metrics.iter().enumerate() {
                let values: Vec<f64> = row
                    .iter()
                    .map(|c| match model {
                        ModelKind::Flat => c.flat[m],
                        ModelKind::Hierarchical => c.hier[m],
                    })
                    .collect();
                let (mean, std) = mean_std(&values);
                points.push(CurvePoint {
                    model,
                    train_size: size,
                    metric: metric.name().to_string(),
                    mean,
                    std,
                    repeats: values.len(),
                });
            }
        }
    }
    Ok(LearningCurve {
        metrics: config.metrics.clone(),
        points,
        cells,
    })
}

pub const RESULTS_HEADER: &str = "model,train_size,metric,mean,std,repeats";

/// Results table. Floats use their shortest exact representation, so the
/// file parses back to identical values.
pub fn results_table(points: &[CurvePoint]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.model, p.train_size, p.metric, p.mean, p.std, p.repeats
        ));
    }
    out
}

/// Fixed-width human-readable table.
pub fn summary_table(points: &[CurvePoint]) -> String {
    let mut out = format!(
        "{:<13} {:>10} {:<12} {:>8} {:>8} {:>7}\n",
        "model", "train_size", "metric", "mean", "std", "repeats"
    );
    for p in points {
        out.push_str(&format!(
            "{:<13} {:>10} {:<12} {:>8.4} {:>8.4} {:>7}\n",
            p.model.to_string(),
            p.train_size,
            p.metric,
            p.mean,
            p.std,
            p.repeats
        ));
    }
    out
}

/// Path of the summary written next to a results file.
pub fn summary_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".summary.txt");
    PathBuf::from(s)
}

/// Writes the results table to `path` and the summary to
/// `<path>.summary.txt`, replacing existing files.
pub fn emit_results(points: &[CurvePoint], path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let path = path.as_ref();
    fs::write(path, results_table(points))?;
    fs::write(summary_path(path), summary_table(points))?;
    Ok(())
}

pub fn parse_results(text: &str) -> Result<Vec<CurvePoint>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        _ => {
            return Err(ExperimentError::Parse {
                line: 1,
                reason: format!("expected header `{RESULTS_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |reason: String| ExperimentError::Parse { line: i + 1, reason };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", f.len())));
            }
            Ok(CurvePoint {
                model: f[0].parse().map_err(err)?,
                train_size: f[1].parse().map_err(|e| err(format!("{e}")))?,
                metric: f[2].to_string(),
                mean: f[3].parse().map_err(|e| err(format!("{e}")))?,
                std: f[4].parse().map_err(|e| err(format!("{e}")))?,
                repeats: f[5].parse().map_err(|e| err(format!("{e}")))?,
            })
        })
        .collect()
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>, ExperimentError> {
    parse_results(&fs::read_to_string(path)?)
}

/// `train_size,repeat,seed,subsample_digest` log of every cell.
pub fn cells_table(cells: &[CellResult]) -> String {
    let mut out = String::from("train_size,repeat,seed,subsample_digest\n");
    for c in cells {
        out.push_str(&format!("{},{},{},{}\n", c.train_size, c.repeat, c.seed, c.subsample_digest));
    }
    out
}
