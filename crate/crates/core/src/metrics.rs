//! Flat and hierarchical evaluation.
//!
//! Hierarchical scores compare ancestor-augmented label sets: each label is
//! replaced by its path from depth 1 down to the label itself (the root is
//! never included). Because both sets are paths from the top of the tree,
//! their overlap is exactly the depth of the lowest common ancestor.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{LabelTree, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::LengthMismatch { .. } => "E_METRICS_LENGTH_MISMATCH",
            MetricsError::Empty => "E_METRICS_EMPTY",
            MetricsError::UnknownLabel(_) => "E_METRICS_UNKNOWN_LABEL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Absent from both truth and predictions.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    pub per_class: Vec<ClassScores>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierAveraging {
    /// Sum intersections and set sizes over all samples, then divide.
    #[default]
    Pooled,
    /// Average per-sample precision and recall.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierScores {
    pub h_precision: f64,
    pub h_recall: f64,
    pub h_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub flat: FlatReport,
    pub hier: HierScores,
    /// LCA depth of each misclassification mapped to its count.
    pub severity_histogram: BTreeMap<usize, usize>,
}

fn check_lengths<T>(truth: &[T], pred: &[T]) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

fn f1(p: f64, r: f64) -> f64 {
    // the harmonic mean of equal values is that value; the general formula
    // can be off by an ulp
    if p == r {
        p
    } else if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest precision, recall and F1 for every label in `label_set`, with
/// macro, micro and support-weighted averages. Undefined ratios count as 0.
pub fn flat_report<S: AsRef<str>>(
    truth: &[S],
    pred: &[S],
    label_set: &[S],
) -> Result<FlatReport, MetricsError> {
    check_lengths(truth, pred)?;
    let index: HashMap<&str, usize> = label_set
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_ref(), i))
        .collect();
    let lookup = |l: &S| {
        index
            .get(l.as_ref())
            .copied()
            .ok_or_else(|| MetricsError::UnknownLabel(l.as_ref().to_string()))
    };
    let k = label_set.len();
    let (mut tp, mut fp, mut fneg) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let mut correct = 0;
    for (t, p) in truth.iter().zip(pred) {
        let (ti, pi) = (lookup(t)?, lookup(p)?);
        if ti == pi {
            tp[ti] += 1;
            correct += 1;
        } else {
            fp[pi] += 1;
            fneg[ti] += 1;
        }
    }
    let n = truth.len();
    let per_class: Vec<ClassScores> = (0..k)
        .map(|c| {
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], tp[c] + fneg[c]);
            ClassScores {
                label: label_set[c].as_ref().to_string(),
                precision,
                recall,
                f1: f1(precision, recall),
                support: tp[c] + fneg[c],
                zero_support: tp[c] + fp[c] + fneg[c] == 0,
            }
        })
        .collect();
    let macro_f1 = if k == 0 {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64
    };
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n as f64;
    let (stp, sfp, sfn) = (tp.iter().sum(), fp.iter().sum::<usize>(), fneg.iter().sum::<usize>());
    let micro_f1 = f1(ratio(stp, stp + sfp), ratio(stp, stp + sfn));
    Ok(FlatReport {
        per_class,
        accuracy: correct as f64 / n as f64,
        macro_f1,
        micro_f1,
        weighted_f1,
    })
}

fn resolve<S: AsRef<str>>(tree: &LabelTree, labels: &[S]) -> Result<Vec<NodeId>, MetricsError> {
    labels
        .iter()
        .map(|l| {
            tree.leaf_id(l.as_ref())
                .map_err(|_| MetricsError::UnknownLabel(l.as_ref().to_string()))
        })
        .collect()
}

/// Hierarchical precision, recall and F1 over leaf ids.
pub fn hier_scores(
    tree: &LabelTree,
    truth: &[NodeId],
    pred: &[NodeId],
    averaging: HierAveraging,
) -> Result<HierScores, MetricsError> {
    check_lengths(truth, pred)?;
    let (mut overlap, mut pred_size, mut true_size) = (0usize, 0usize, 0usize);
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    for (&t, &p) in truth.iter().zip(pred) {
        let common = tree.lca_depth(t, p).map_err(|_| MetricsError::UnknownLabel(format!("#{t}/#{p}")))?;
        let (dp, dt) = (tree.depth(p), tree.depth(t));
        overlap += common;
        pred_size += dp;
        true_size += dt;
        p_sum += ratio(common, dp);
        r_sum += ratio(common, dt);
    }
    let (h_precision, h_recall) = match averaging {
        HierAveraging::Pooled => (ratio(overlap, pred_size), ratio(overlap, true_size)),
        HierAveraging::PerSample => {
            let n = truth.len() as f64;
            (p_sum / n, r_sum / n)
        }
    };
    Ok(HierScores {
        h_precision,
        h_recall,
        h_f1: f1(h_precision, h_recall),
    })
}

/// Hierarchical precision, recall and F1 (pooled over samples).
pub fn hier_report<S: AsRef<str>>(
    tree: &LabelTree,
    truth: &[S],
    pred: &[S],
) -> Result<HierScores, MetricsError> {
    hier_report_with(tree, truth, pred, HierAveraging::Pooled)
}

pub fn hier_report_with<S: AsRef<str>>(
    tree: &LabelTree,
    truth: &[S],
    pred: &[S],
    averaging: HierAveraging,
) -> Result<HierScores, MetricsError> {
    check_lengths(truth, pred)?;
    hier_scores(tree, &resolve(tree, truth)?, &resolve(tree, pred)?, averaging)
}

/// LCA depth of every misclassified sample, counted per depth.
pub fn severity_histogram<S: AsRef<str>>(
    tree: &LabelTree,
    truth: &[S],
    pred: &[S],
) -> Result<BTreeMap<usize, usize>, MetricsError> {
    check_lengths(truth, pred)?;
    let (t, p) = (resolve(tree, truth)?, resolve(tree, pred)?);
    let mut hist = BTreeMap::new();
    for (&a, &b) in t.iter().zip(&p) {
        if a != b {
            *hist.entry(tree.lca_depth(a, b).unwrap()).or_insert(0) += 1;
        }
    }
    Ok(hist)
}

/// Label set used when none is given: every label seen in truth or
/// predictions, sorted.
pub fn observed_labels<S: AsRef<str>>(truth: &[S], pred: &[S]) -> Vec<String> {
    let mut v: Vec<String> = truth.iter().chain(pred).map(|s| s.as_ref().to_string()).collect();
    v.sort();
    v.dedup();
    v
}

impl MetricsReport {
    pub fn evaluate<S: AsRef<str>>(
        tree: &LabelTree,
        truth: &[S],
        pred: &[S],
        label_set: Option<&[String]>,
        averaging: HierAveraging,
    ) -> Result<Self, MetricsError> {
        let observed;
        let labels = match label_set {
            Some(l) => l,
            None => {
                observed = observed_labels(truth, pred);
                &observed
            }
        };
        let truth: Vec<&str> = truth.iter().map(|s| s.as_ref()).collect();
        let pred: Vec<&str> = pred.iter().map(|s| s.as_ref()).collect();
        let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        Ok(MetricsReport {
            flat: flat_report(&truth, &pred, &label_refs)?,
            hier: hier_report_with(tree, &truth, &pred, averaging)?,
            severity_histogram: severity_histogram(tree, &truth, &pred)?,
        })
    }

    /// `key,value` lines: averages, hierarchical scores, severity buckets and
    /// per-class scores.
    pub fn to_kv_table(&self) -> String {
        let mut out = String::from("key,value\n");
        let mut kv = |k: &str, v: String| {
            out.push_str(&csv_field(k));
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        };
        kv("accuracy", format!("{:.6}", self.flat.accuracy));
        kv("macro_f1", format!("{:.6}", self.flat.macro_f1));
        kv("micro_f1", format!("{:.6}", self.flat.micro_f1));
        kv("weighted_f1", format!("{:.6}", self.flat.weighted_f1));
        kv("h_precision", format!("{:.6}", self.hier.h_precision));
        kv("h_recall", format!("{:.6}", self.hier.h_recall));
        kv("h_f1", format!("{:.6}", self.hier.h_f1));
        for (d, c) in &self.severity_histogram {
            kv(&format!("errors_at_lca_depth_{d}"), c.to_string());
        }
        for c in &self.flat.per_class {
            kv(&format!("{}.precision", c.label), format!("{:.6}", c.precision));
            kv(&format!("{}.recall", c.label), format!("{:.6}", c.recall));
            kv(&format!("{}.f1", c.label), format!("{:.6}", c.f1));
            kv(&format!("{}.support", c.label), c.support.to_string());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
