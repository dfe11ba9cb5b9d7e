//! Benthic cover proportions from point annotations.
//!
//! Each annotated point is mapped to its ancestor at the requested tree level
//! (leaves shallower than the level stay themselves) and relative frequencies
//! are reported, pooled over all points and per image.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::tree::{LabelTree, NodeId};

/// Points per survey image in the reference annotation protocol.
pub const DEFAULT_POINTS_PER_IMAGE: usize = 25;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("row {row}: unknown label {label:?}")]
    UnknownLabel { row: usize, label: String },
    #[error("annotation set is empty")]
    EmptyAnnotationSet,
    #[error("duplicate point ({image_id}, {point_id})")]
    DuplicateKey { image_id: String, point_id: u32 },
    #[error("truth and prediction cover different points: {0}")]
    KeyMismatch(String),
    #[error("level must be at least 1")]
    InvalidLevel,
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CoverError {
    pub fn code(&self) -> &'static str {
        match self {
            CoverError::UnknownLabel { .. } => "E_COVER_UNKNOWN_LABEL",
            CoverError::EmptyAnnotationSet => "E_COVER_EMPTY",
            CoverError::DuplicateKey { .. } => "E_COVER_DUPLICATE_KEY",
            CoverError::KeyMismatch(_) => "E_COVER_KEY_MISMATCH",
            CoverError::InvalidLevel => "E_COVER_INVALID_LEVEL",
            CoverError::MalformedRow { .. } => "E_COVER_MALFORMED_ROW",
            CoverError::Io(_) => "E_IO",
            CoverError::Csv(_) => "E_COVER_CSV",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub image_id: String,
    pub point_id: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    records: Vec<Annotation>,
    /// Nominal points per image. Informational only; proportions always use
    /// the actual point count.
    pub points_per_image: usize,
}

impl AnnotationSet {
    pub fn new(records: Vec<Annotation>) -> Result<Self, CoverError> {
        let mut keys = BTreeSet::new();
        for r in &records {
            if !keys.insert((r.image_id.as_str(), r.point_id)) {
                return Err(CoverError::DuplicateKey {
                    image_id: r.image_id.clone(),
                    point_id: r.point_id,
                });
            }
        }
        Ok(AnnotationSet {
            records,
            points_per_image: DEFAULT_POINTS_PER_IMAGE,
        })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self, CoverError> {
        Self::new(
            data.samples()
                .iter()
                .map(|s| Annotation {
                    image_id: s.image_id.clone(),
                    point_id: s.point_id,
                    label: s.label.clone(),
                })
                .collect(),
        )
    }

    /// Reads any table whose first three columns are image id, point id and
    /// label (dataset files, annotation-only files and prediction files all
    /// qualify). Remaining columns are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CoverError> {
        Self::read(File::open(path)?)
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, CoverError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || header[0].trim() != "image_id" || header[1].trim() != "point_id" {
            return Err(CoverError::MalformedRow {
                row: 0,
                reason: "header must start with image_id,point_id,<label>".into(),
            });
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() < 3 {
                return Err(CoverError::MalformedRow {
                    row,
                    reason: "expected at least 3 fields".into(),
                });
            }
            let point_id = rec[1].trim().parse().map_err(|e| CoverError::MalformedRow {
                row,
                reason: format!("point_id {:?}: {e}", &rec[1]),
            })?;
            records.push(Annotation {
                image_id: rec[0].to_string(),
                point_id,
                label: rec[2].to_string(),
            });
        }
        Self::new(records)
    }

    pub fn records(&self) -> &[Annotation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn keys(&self) -> BTreeSet<(&str, u32)> {
        self.records.iter().map(|r| (r.image_id.as_str(), r.point_id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryCover {
    pub node: NodeId,
    /// Node name, qualified with its path when another node shares it.
    pub name: String,
    pub count: usize,
    /// Pooled over all points.
    pub proportion: f64,
    /// Mean over images of the per-image proportion.
    pub mean_image_proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    pub level: usize,
    pub n_points: usize,
    /// Categories with at least one point, in tree document order.
    pub categories: Vec<CategoryCover>,
    /// Image id to category name to proportion of that image's points.
    pub per_image: BTreeMap<String, BTreeMap<String, f64>>,
}

impl CoverReport {
    pub fn per_category(&self) -> BTreeMap<String, f64> {
        self.categories.iter().map(|c| (c.name.clone(), c.proportion)).collect()
    }

    /// Pooled proportion of a category, zero when it has no points.
    pub fn proportion(&self, name: &str) -> f64 {
        self.categories
            .iter()
            .find(|c| c.name == name)
            .map_or(0.0, |c| c.proportion)
    }

    fn proportion_of(&self, node: NodeId) -> f64 {
        self.categories
            .iter()
            .find(|c| c.node == node)
            .map_or(0.0, |c| c.proportion)
    }

    /// `category,count,proportion,mean_image_proportion` table.
    pub fn to_table(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["category", "count", "proportion", "mean_image_proportion"]).unwrap();
        for c in &self.categories {
            w.write_record([
                c.name.clone(),
                c.count.to_string(),
                format!("{:.6}", c.proportion),
                format!("{:.6}", c.mean_image_proportion),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Maps every record to its category node at `level`.
fn categorize(tree: &LabelTree, ann: &AnnotationSet, level: usize) -> Result<Vec<NodeId>, CoverError> {
    if level == 0 {
        return Err(CoverError::InvalidLevel);
    }
    ann.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let leaf = tree.leaf_id(&r.label).map_err(|_| CoverError::UnknownLabel {
                row: i + 1,
                label: r.label.clone(),
            })?;
            Ok(tree.ancestor_at_level(leaf, level).expect("leaf and level are valid"))
        })
        .collect()
}

/// Cover proportions of every category at tree depth `level`.
pub fn cover_at_level(tree: &LabelTree, ann: &AnnotationSet, level: usize) -> Result<CoverReport, CoverError> {
    if ann.is_empty() {
        return Err(CoverError::EmptyAnnotationSet);
    }
    let cats = categorize(tree, ann, level)?;
    let names = tree.qualified_names();
    let n = cats.len();

    let mut counts = vec![0usize; tree.len()];
    let mut by_image: BTreeMap<&str, BTreeMap<NodeId, usize>> = BTreeMap::new();
    for (r, &c) in ann.records.iter().zip(&cats) {
        counts[c] += 1;
        *by_image.entry(r.image_id.as_str()).or_default().entry(c).or_insert(0) += 1;
    }
    let n_images = by_image.len() as f64;
    let mut image_sum = vec![0.0; tree.len()];
    let mut per_image = BTreeMap::new();
    for (img, cc) in &by_image {
        let total: usize = cc.values().sum();
        let mut props = BTreeMap::new();
        for (&c, &k) in cc {
            let p = k as f64 / total as f64;
            image_sum[c] += p;
            props.insert(names[c].clone(), p);
        }
        per_image.insert(img.to_string(), props);
    }
    let categories = (0..tree.len())
        .filter(|&c| counts[c] > 0)
        .map(|c| CategoryCover {
            node: c,
            name: names[c].clone(),
            count: counts[c],
            proportion: counts[c] as f64 / n as f64,
            mean_image_proportion: image_sum[c] / n_images,
        })
        .collect();
    Ok(CoverReport {
        level,
        n_points: n,
        categories,
        per_image,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryError {
    pub node: NodeId,
    pub name: String,
    pub truth: f64,
    pub predicted: f64,
}

impl CategoryError {
    pub fn signed(&self) -> f64 {
        self.truth - self.predicted
    }

    pub fn abs_error(&self) -> f64 {
        self.signed().abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverComparison {
    pub level: usize,
    /// Every category present in truth or prediction, in document order.
    pub categories: Vec<CategoryError>,
    /// Sum of absolute errors over categories. Never grows when the level
    /// becomes coarser.
    pub total_abs_error: f64,
    /// `total_abs_error` divided by the number of categories listed.
    pub mean_abs_error: f64,
}

impl CoverComparison {
    pub fn per_category(&self) -> BTreeMap<String, f64> {
        self.categories.iter().map(|c| (c.name.clone(), c.abs_error())).collect()
    }

    pub fn abs_error(&self, name: &str) -> f64 {
        self.categories
            .iter()
            .find(|c| c.name == name)
            .map_or(0.0, |c| c.abs_error())
    }

    /// `category,truth,predicted,abs_error` table.
    pub fn to_table(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["category", "truth", "predicted", "abs_error"]).unwrap();
        for c in &self.categories {
            w.write_record([
                c.name.clone(),
                format!("{:.6}", c.truth),
                format!("{:.6}", c.predicted),
                format!("{:.6}", c.abs_error()),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Absolute difference between true and predicted pooled cover per category.
pub fn cover_error(
    tree: &LabelTree,
    truth: &AnnotationSet,
    predicted: &AnnotationSet,
    level: usize,
) -> Result<CoverComparison, CoverError> {
    let (tk, pk) = (truth.keys(), predicted.keys());
    if tk != pk {
        let missing = tk.symmetric_difference(&pk).next().unwrap();
        return Err(CoverError::KeyMismatch(format!(
            "point ({}, {}) is only in one set",
            missing.0, missing.1
        )));
    }
    let t = cover_at_level(tree, truth, level)?;
    let p = cover_at_level(tree, predicted, level)?;
    let names = tree.qualified_names();
    let nodes: BTreeSet<NodeId> = t
        .categories
        .iter()
        .chain(&p.categories)
        .map(|c| c.node)
        .collect();
    let categories: Vec<CategoryError> = nodes
        .into_iter()
        .map(|node| CategoryError {
            node,
            name: names[node].clone(),
            truth: t.proportion_of(node),
            predicted: p.proportion_of(node),
        })
        .collect();
    let total_abs_error: f64 = categories.iter().map(|c| c.abs_error()).sum();
    Ok(CoverComparison {
        level,
        mean_abs_error: total_abs_error / categories.len() as f64,
        categories,
        total_abs_error,
    })
}
