//! Feature-vector datasets, class statistics, stratified splits and
//! training subsamples.
//!
//! File format is comma-separated text with a header
//! `image_id,point_id,label,f0,...,f{d-1}`. Labels containing commas are
//! quoted.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tree::LabelTree;

/// Feature width of the CoralNet EfficientNet-B0 backbone.
pub const DEFAULT_FEATURE_DIM: usize = 1280;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}: unknown label {label:?}")]
    UnknownLabel { row: usize, label: String },
    #[error("row {row}: expected {expected} features, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("requested {requested} samples but only {available} are available")]
    RequestTooLarge { requested: usize, available: usize },
    #[error("sample count must be positive")]
    EmptyRequest,
    #[error("duplicate sample key ({image_id}, {point_id})")]
    DuplicateKey { image_id: String, point_id: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::UnknownLabel { .. } => "E_DATA_UNKNOWN_LABEL",
            DatasetError::DimensionMismatch { .. } => "E_DATA_DIMENSION_MISMATCH",
            DatasetError::MalformedRow { .. } => "E_DATA_MALFORMED_ROW",
            DatasetError::BadHeader(_) => "E_DATA_BAD_HEADER",
            DatasetError::InvalidFraction(_) => "E_DATA_INVALID_FRACTION",
            DatasetError::RequestTooLarge { .. } => "E_DATA_REQUEST_TOO_LARGE",
            DatasetError::EmptyRequest => "E_DATA_EMPTY_REQUEST",
            DatasetError::DuplicateKey { .. } => "E_DATA_DUPLICATE_KEY",
            DatasetError::Io(_) => "E_IO",
            DatasetError::Csv(_) => "E_DATA_CSV",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image_id: String,
    pub point_id: u32,
    pub label: String,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    histogram: BTreeMap<String, usize>,
}

impl Dataset {
    /// Builds a dataset, checking dimensions and (optionally) labels.
    pub fn new(
        samples: Vec<Sample>,
        feature_dim: usize,
        tree: Option<&LabelTree>,
    ) -> Result<Self, DatasetError> {
        if feature_dim == 0 {
            return Err(DatasetError::BadHeader("no feature columns".into()));
        }
        let mut histogram = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let row = i + 1;
            if s.features.len() != feature_dim {
                return Err(DatasetError::DimensionMismatch {
                    row,
                    expected: feature_dim,
                    found: s.features.len(),
                });
            }
            if let Some(tree) = tree {
                if tree.leaf_id(&s.label).is_err() {
                    return Err(DatasetError::UnknownLabel {
                        row,
                        label: s.label.clone(),
                    });
                }
            }
            *histogram.entry(s.label.clone()).or_insert(0) += 1;
        }
        Ok(Dataset {
            samples,
            feature_dim,
            histogram,
        })
    }

    /// Loads a dataset file, validating labels against `tree` when given.
    pub fn load(path: impl AsRef<Path>, tree: Option<&LabelTree>) -> Result<Self, DatasetError> {
        Self::read(File::open(path)?, tree)
    }

    pub fn read<R: Read>(reader: R, tree: Option<&LabelTree>) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected = ["image_id", "point_id", "label"];
        if header.len() < 3 || header.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(DatasetError::BadHeader(format!(
                "expected `image_id,point_id,label,f0,...`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let feature_dim = header.len() - 3;
        if feature_dim == 0 {
            return Err(DatasetError::BadHeader("no feature columns".into()));
        }

        let mut samples = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record?;
            if record.len() < 3 {
                return Err(DatasetError::MalformedRow {
                    row,
                    reason: format!("expected at least 3 fields, found {}", record.len()),
                });
            }
            if record.len() - 3 != feature_dim {
                return Err(DatasetError::DimensionMismatch {
                    row,
                    expected: feature_dim,
                    found: record.len() - 3,
                });
            }
            let point_id = record[1].trim().parse::<u32>().map_err(|e| DatasetError::MalformedRow {
                row,
                reason: format!("point_id {:?}: {e}", &record[1]),
            })?;
            let label = record[2].to_string();
            if let Some(tree) = tree {
                if tree.leaf_id(&label).is_err() {
                    return Err(DatasetError::UnknownLabel { row, label });
                }
            }
            let features = record
                .iter()
                .skip(3)
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| DatasetError::MalformedRow {
                        row,
                        reason: format!("feature {v:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            samples.push(Sample {
                image_id: record[0].to_string(),
                point_id,
                label,
                features,
            });
        }
        Dataset::new(samples, feature_dim, None)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let mut file = std::io::BufWriter::new(File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    /// Writes the tabular form. Floats use their shortest exact representation,
    /// so a write/read cycle is lossless.
    pub fn write<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["image_id".to_string(), "point_id".into(), "label".into()];
        header.extend((0..self.feature_dim).map(|i| format!("f{i}")));
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(self.feature_dim + 3);
        for s in &self.samples {
            row.clear();
            row.push(s.image_id.clone());
            row.push(s.point_id.to_string());
            row.push(s.label.clone());
            row.extend(s.features.iter().map(|f| f.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Label counts keyed by label name.
    pub fn histogram(&self) -> &BTreeMap<String, usize> {
        &self.histogram
    }

    /// Label counts sorted by descending count, ties by name.
    pub fn sorted_histogram(&self) -> Vec<(String, usize)> {
        let mut v: Vec<_> = self.histogram.iter().map(|(k, &c)| (k.clone(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn labels(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.label.as_str()).collect()
    }

    /// Row-major matrix of all feature vectors.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.samples.len(), self.feature_dim));
        for (mut row, s) in m.rows_mut().into_iter().zip(&self.samples) {
            row.iter_mut().zip(&s.features).for_each(|(d, &v)| *d = v);
        }
        m
    }

    /// Dataset made of the samples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let samples: Vec<Sample> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.feature_dim, None).expect("subset of a valid dataset")
    }

    /// SHA-256 over the sample keys, labels and feature bits in order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.image_id.as_bytes());
            h.update([0]);
            h.update(s.point_id.to_le_bytes());
            h.update(s.label.as_bytes());
            h.update([0]);
            for f in &s.features {
                h.update(f.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Per-class test-set size used by [`stratified_split`].
    pub fn test_count(class_size: usize, test_fraction: f64) -> usize {
        if class_size < 2 {
            return 0;
        }
        // round half up, at least one, never the whole class
        let raw = (class_size as f64 * test_fraction + 0.5).floor() as usize;
        raw.clamp(1, class_size - 1)
    }
}

/// Splits `data` into train and test, stratified by label.
///
/// Each class of size `n` sends `round(n * test_fraction)` samples to the test
/// set, at least one when `n >= 2` and none when `n == 1`. Classes are
/// visited in name order so a given seed always yields the same partition.
/// Both halves keep the original sample order.
pub fn stratified_split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.samples.iter().enumerate() {
        by_class.entry(s.label.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; data.len()];
    for members in by_class.values() {
        let k = Dataset::test_count(members.len(), test_fraction);
        for j in index::sample(&mut rng, members.len(), k) {
            in_test[members[j]] = true;
        }
    }
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| in_test[i]);
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

/// Uniform random subset of `n` samples without replacement. The subset keeps
/// the original sample order.
pub fn subsample_train(train: &Dataset, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n == 0 {
        return Err(DatasetError::EmptyRequest);
    }
    if n > train.len() {
        return Err(DatasetError::RequestTooLarge {
            requested: n,
            available: train.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, train.len(), n).into_vec();
    idx.sort_unstable();
    Ok(train.select(&idx))
}
