//! Top-down Local-Classifier-per-Parent-Node model and the flat baseline.
//!
//! Every internal node whose samples fall under at least two of its children
//! gets its own MLP choosing among those children. A node whose samples all
//! fall under one child passes straight through to it. Prediction starts at
//! the root and follows the argmax child until a leaf is reached; ties go to
//! the child written first in the tree document.
//!
//! Node classifiers are trained in parallel. Each node's seed is derived from
//! the configured seed and the node id, so the result does not depend on
//! scheduling. The root classifier uses the configured seed unchanged, which
//! makes a hierarchical model on a depth-1 tree identical to the flat model.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::derive_seed;
use crate::mlp::{argmax, inverse_frequency_weights, Mlp, MlpError, MlpFile, Standardizer, TrainConfig};
use crate::tree::{LabelTree, NodeId, TreeError};

#[derive(Debug, Error)]
pub enum HierError {
    #[error("label {0:?} is not a leaf of the tree")]
    LabelNotInTree(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set covers {found} leaf class(es), at least 2 are needed")]
    TooFewClasses { found: usize },
    #[error("expected feature width {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no trained path below node {0:?}")]
    NoTrainedPath(String),
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HierError {
    pub fn code(&self) -> &'static str {
        match self {
            HierError::LabelNotInTree(_) => "E_MODEL_LABEL_NOT_IN_TREE",
            HierError::EmptyTrainingSet => "E_MODEL_EMPTY_TRAINING_SET",
            HierError::TooFewClasses { .. } => "E_MODEL_TOO_FEW_CLASSES",
            HierError::DimensionMismatch { .. } => "E_MODEL_DIMENSION_MISMATCH",
            HierError::NoTrainedPath(_) => "E_MODEL_NO_TRAINED_PATH",
            HierError::Bundle(_) => "E_MODEL_BUNDLE",
            HierError::Mlp(e) => e.code(),
            HierError::Tree(e) => e.code(),
            HierError::Io(_) => "E_IO",
            HierError::Json(_) => "E_JSON",
        }
    }
}

/// One node's classifier and the children its outputs stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassifier {
    pub mlp: Mlp,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierModel {
    tree: LabelTree,
    feature_dim: usize,
    classifiers: BTreeMap<NodeId, NodeClassifier>,
    pass_through: BTreeMap<NodeId, NodeId>,
    unreachable: Vec<NodeId>,
    standardizer: Option<Standardizer>,
    config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatModel {
    tree: LabelTree,
    feature_dim: usize,
    mlp: Mlp,
    leaf_order: Vec<NodeId>,
    unreachable: Vec<NodeId>,
    standardizer: Option<Standardizer>,
    config: TrainConfig,
}

/// Decisions taken by a top-down prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPath {
    /// Nodes from depth 1 down to the predicted leaf.
    pub nodes: Vec<NodeId>,
    /// Probability of each step; pass-through steps have probability 1.
    pub probs: Vec<f64>,
    pub leaf: NodeId,
}

impl PredictionPath {
    pub fn joint_probability(&self) -> f64 {
        self.probs.iter().product()
    }
}

/// Seed of the classifier at `node`.
pub fn node_seed(base: u64, tree: &LabelTree, node: NodeId) -> u64 {
    if node == tree.root() {
        base
    } else {
        derive_seed(base, node as u64)
    }
}

/// For every internal node, the samples routed to it paired with the child
/// whose subtree holds their leaf. Samples are listed in input order.
pub fn routed_sets(tree: &LabelTree, leaves: &[NodeId]) -> BTreeMap<NodeId, Vec<(usize, NodeId)>> {
    let mut out: BTreeMap<NodeId, Vec<(usize, NodeId)>> = BTreeMap::new();
    for (i, &leaf) in leaves.iter().enumerate() {
        let path = tree.ancestors(leaf).expect("leaf ids come from this tree");
        let mut parent = tree.root();
        for node in path {
            out.entry(parent).or_default().push((i, node));
            parent = node;
        }
    }
    out
}

fn leaf_ids(tree: &LabelTree, data: &Dataset) -> Result<Vec<NodeId>, HierError> {
    data.samples()
        .iter()
        .map(|s| tree.leaf_id(&s.label).map_err(|_| HierError::LabelNotInTree(s.label.clone())))
        .collect()
}

fn prepared_features(data: &Dataset, config: &TrainConfig) -> (Array2<f64>, Option<Standardizer>) {
    let mut x = data.feature_matrix();
    let standardizer = config.standardize.then(|| Standardizer::fit(x.view()));
    if let Some(s) = &standardizer {
        s.transform(&mut x);
    }
    (x, standardizer)
}

fn unreachable_leaves(tree: &LabelTree, leaves: &[NodeId]) -> Vec<NodeId> {
    let mut seen = vec![false; tree.len()];
    for &l in leaves {
        seen[l] = true;
    }
    let out: Vec<NodeId> = tree.leaves().filter(|&l| !seen[l]).collect();
    if !out.is_empty() {
        log::warn!(
            "{} leaf class(es) have no training samples and can never be predicted",
            out.len()
        );
    }
    out
}

fn train_classifier(
    x: ArrayView2<f64>,
    y: &[usize],
    classes: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<Mlp, MlpError> {
    let mut sizes = vec![x.ncols()];
    sizes.extend(&config.hidden);
    sizes.push(classes);
    let mut mlp = Mlp::new(&sizes, seed)?;
    let cfg = TrainConfig { seed, ..config.clone() };
    let weights = config.class_weighting.then(|| inverse_frequency_weights(y, classes));
    mlp.train_weighted(x, y, &cfg, weights.as_deref())?;
    Ok(mlp)
}

/// Trains one classifier per qualifying parent node.
pub fn fit_lcpn(tree: &LabelTree, train: &Dataset, config: &TrainConfig) -> Result<HierModel, HierError> {
    if train.is_empty() {
        return Err(HierError::EmptyTrainingSet);
    }
    config.validate()?;
    let leaves = leaf_ids(tree, train)?;
    let (x, standardizer) = prepared_features(train, config);
    let routes = routed_sets(tree, &leaves);

    let mut pass_through = BTreeMap::new();
    let mut jobs = Vec::new();
    for (&node, routed) in &routes {
        let trained: Vec<NodeId> = tree
            .children(node)
            .iter()
            .copied()
            .filter(|c| routed.iter().any(|(_, r)| r == c))
            .collect();
        match trained.len() {
            0 => {}
            1 => {
                pass_through.insert(node, trained[0]);
            }
            _ => jobs.push((node, trained, routed)),
        }
    }

    let classifiers = jobs
        .into_par_iter()
        .map(|(node, children, routed)| {
            let rows: Vec<usize> = routed.iter().map(|&(i, _)| i).collect();
            let y: Vec<usize> = routed
                .iter()
                .map(|(_, c)| children.iter().position(|ch| ch == c).unwrap())
                .collect();
            let xs = x.select(Axis(0), &rows);
            let seed = node_seed(config.seed, tree, node);
            let mlp = train_classifier(xs.view(), &y, children.len(), seed, config)?;
            Ok((node, NodeClassifier { mlp, children }))
        })
        .collect::<Result<BTreeMap<_, _>, MlpError>>()?;

    Ok(HierModel {
        tree: tree.clone(),
        feature_dim: train.feature_dim(),
        classifiers,
        pass_through,
        unreachable: unreachable_leaves(tree, &leaves),
        standardizer,
        config: config.clone(),
    })
}

/// Trains a single classifier over every leaf that has training samples.
pub fn fit_flat(tree: &LabelTree, train: &Dataset, config: &TrainConfig) -> Result<FlatModel, HierError> {
    if train.is_empty() {
        return Err(HierError::EmptyTrainingSet);
    }
    config.validate()?;
    let leaves = leaf_ids(tree, train)?;
    let unreachable = unreachable_leaves(tree, &leaves);
    let leaf_order: Vec<NodeId> = tree.leaves().filter(|l| !unreachable.contains(l)).collect();
    if leaf_order.len() < 2 {
        return Err(HierError::TooFewClasses {
            found: leaf_order.len(),
        });
    }
    let mut position = vec![usize::MAX; tree.len()];
    for (i, &l) in leaf_order.iter().enumerate() {
        position[l] = i;
    }
    let y: Vec<usize> = leaves.iter().map(|&l| position[l]).collect();
    let (x, standardizer) = prepared_features(train, config);
    let mlp = train_classifier(x.view(), &y, leaf_order.len(), config.seed, config)?;
    Ok(FlatModel {
        tree: tree.clone(),
        feature_dim: train.feature_dim(),
        mlp,
        leaf_order,
        unreachable,
        standardizer,
        config: config.clone(),
    })
}

fn check_dim(expected: usize, found: usize) -> Result<(), HierError> {
    if expected != found {
        return Err(HierError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn standardized_rows(s: &Option<Standardizer>, x: ArrayView2<f64>) -> Array2<f64> {
    let mut x = x.to_owned();
    if let Some(s) = s {
        s.transform(&mut x);
    }
    x
}

impl HierModel {
    pub fn tree(&self) -> &LabelTree {
        &self.tree
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classifiers(&self) -> &BTreeMap<NodeId, NodeClassifier> {
        &self.classifiers
    }

    /// Single-child nodes mapped to the child they pass through to.
    pub fn pass_through(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.pass_through
    }

    /// Leaves that had no training samples.
    pub fn unreachable(&self) -> &[NodeId] {
        &self.unreachable
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    /// Child probabilities at `node` for an already standardized input.
    fn step(&self, node: NodeId, x: &[f64]) -> Result<Vec<(NodeId, f64)>, HierError> {
        if let Some(c) = self.classifiers.get(&node) {
            let p = c.mlp.predict_proba(x)?;
            Ok(c.children.iter().copied().zip(p).collect())
        } else if let Some(&child) = self.pass_through.get(&node) {
            Ok(vec![(child, 1.0)])
        } else {
            Err(HierError::NoTrainedPath(self.tree.name(node).to_string()))
        }
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, HierError> {
        check_dim(self.feature_dim, x.len())?;
        let mut v = x.to_vec();
        if let Some(s) = &self.standardizer {
            s.transform_row(&mut v);
        }
        Ok(v)
    }

    /// Distribution over the trained children of `node` for raw input `x`.
    pub fn node_distribution(&self, x: &[f64], node: NodeId) -> Result<Vec<(NodeId, f64)>, HierError> {
        let v = self.prepare(x)?;
        self.step(node, &v)
    }

    /// Greedy argmax descent from the root.
    pub fn predict_topdown(&self, x: &[f64]) -> Result<PredictionPath, HierError> {
        let v = self.prepare(x)?;
        let mut node = self.tree.root();
        let mut path = PredictionPath { nodes: Vec::new(), probs: Vec::new(), leaf: node };
        while !self.tree.is_leaf(node) {
            let dist = self.step(node, &v)?;
            let probs: Vec<f64> = dist.iter().map(|d| d.1).collect();
            let (child, p) = dist[argmax(&probs)];
            path.nodes.push(child);
            path.probs.push(p);
            node = child;
        }
        path.leaf = node;
        Ok(path)
    }

    /// Batched [`predict_topdown`](Self::predict_topdown): rows sitting at the
    /// same node share one forward pass.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<PredictionPath>, HierError> {
        check_dim(self.feature_dim, x.ncols())?;
        let x = standardized_rows(&self.standardizer, x);
        let root = self.tree.root();
        let mut paths: Vec<PredictionPath> = (0..x.nrows())
            .map(|_| PredictionPath { nodes: Vec::new(), probs: Vec::new(), leaf: root })
            .collect();
        let mut frontier: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        if !self.tree.is_leaf(root) && x.nrows() > 0 {
            frontier.insert(root, (0..x.nrows()).collect());
        }
        while let Some((node, rows)) = frontier.pop_first() {
            let decisions: Vec<(NodeId, f64)> = if let Some(c) = self.classifiers.get(&node) {
                let probs = c.mlp.predict_proba_batch(x.select(Axis(0), &rows).view())?;
                probs
                    .rows()
                    .into_iter()
                    .map(|p| {
                        let j = argmax(p.as_slice().unwrap());
                        (c.children[j], p[j])
                    })
                    .collect()
            } else if let Some(&child) = self.pass_through.get(&node) {
                vec![(child, 1.0); rows.len()]
            } else {
                return Err(HierError::NoTrainedPath(self.tree.name(node).to_string()));
            };
            for (&r, (child, p)) in rows.iter().zip(decisions) {
                let path = &mut paths[r];
                path.nodes.push(child);
                path.probs.push(p);
                path.leaf = child;
                if !self.tree.is_leaf(child) {
                    frontier.entry(child).or_default().push(r);
                }
            }
        }
        Ok(paths)
    }

    /// Product of the step probabilities along the root-to-`leaf` path; zero
    /// when the path crosses an untrained branch.
    pub fn path_probability(&self, x: &[f64], leaf: NodeId) -> Result<f64, HierError> {
        let v = self.prepare(x)?;
        let mut parent = self.tree.root();
        let mut prob = 1.0;
        for node in self.tree.ancestors(leaf)? {
            let dist = match self.step(parent, &v) {
                Ok(d) => d,
                Err(HierError::NoTrainedPath(_)) => return Ok(0.0),
                Err(e) => return Err(e),
            };
            prob *= dist.iter().find(|d| d.0 == node).map_or(0.0, |d| d.1);
            parent = node;
        }
        Ok(prob)
    }
}

impl FlatModel {
    pub fn tree(&self) -> &LabelTree {
        &self.tree
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Output ordering of the classifier: trained leaves in document order.
    pub fn leaf_order(&self) -> &[NodeId] {
        &self.leaf_order
    }

    pub fn unreachable(&self) -> &[NodeId] {
        &self.unreachable
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, HierError> {
        check_dim(self.feature_dim, x.len())?;
        let mut v = x.to_vec();
        if let Some(s) = &self.standardizer {
            s.transform_row(&mut v);
        }
        Ok(self.mlp.predict_proba(&v)?)
    }

    /// Argmax leaf; ties go to the leaf written first.
    pub fn predict_flat(&self, x: &[f64]) -> Result<NodeId, HierError> {
        Ok(self.leaf_order[argmax(&self.predict_proba(x)?)])
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<NodeId>, HierError> {
        check_dim(self.feature_dim, x.ncols())?;
        let x = standardized_rows(&self.standardizer, x);
        let probs = self.mlp.predict_proba_batch(x.view())?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|p| self.leaf_order[argmax(p.as_slice().unwrap())])
            .collect())
    }
}

pub const BUNDLE_FORMAT: &str = "reefhc-bundle";
pub const BUNDLE_VERSION: u32 = 1;
const TREE_FILE: &str = "tree.txt";
const MANIFEST_FILE: &str = "manifest.json";
const FLAT_FILE: &str = "flat.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    Hier,
    Flat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassifierEntry {
    node: NodeId,
    name: String,
    file: String,
    children: Vec<NodeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PassThroughEntry {
    node: NodeId,
    child: NodeId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    kind: BundleKind,
    feature_dim: usize,
    config: TrainConfig,
    standardizer: Option<Standardizer>,
    unreachable_leaves: Vec<String>,
    #[serde(default)]
    classifiers: Vec<ClassifierEntry>,
    #[serde(default)]
    pass_through: Vec<PassThroughEntry>,
    #[serde(default)]
    flat_file: Option<String>,
}

/// A trained model of either kind, as stored in a bundle directory.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Hier(HierModel),
    Flat(FlatModel),
}

impl Model {
    pub fn tree(&self) -> &LabelTree {
        match self {
            Model::Hier(m) => &m.tree,
            Model::Flat(m) => &m.tree,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Model::Hier(m) => m.feature_dim,
            Model::Flat(m) => m.feature_dim,
        }
    }

    pub fn kind(&self) -> BundleKind {
        match self {
            Model::Hier(_) => BundleKind::Hier,
            Model::Flat(_) => BundleKind::Flat,
        }
    }

    /// Predicted leaf per row. For the flat model the path is the predicted
    /// leaf's ancestor chain with the leaf probability on the last step.
    pub fn predict_paths(&self, x: ArrayView2<f64>) -> Result<Vec<PredictionPath>, HierError> {
        match self {
            Model::Hier(m) => m.predict_batch(x),
            Model::Flat(m) => {
                let leaves = m.predict_batch(x)?;
                leaves
                    .into_iter()
                    .map(|leaf| {
                        let nodes = m.tree.ancestors(leaf)?;
                        let probs = vec![1.0; nodes.len()];
                        Ok(PredictionPath { nodes, probs, leaf })
                    })
                    .collect()
            }
        }
    }

    pub fn predict_leaves(&self, x: ArrayView2<f64>) -> Result<Vec<NodeId>, HierError> {
        match self {
            Model::Hier(m) => Ok(m.predict_batch(x)?.into_iter().map(|p| p.leaf).collect()),
            Model::Flat(m) => m.predict_batch(x),
        }
    }

    /// Writes the tree document, a manifest and one network file per
    /// classifier into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), HierError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let tree = self.tree();
        fs::write(dir.join(TREE_FILE), tree.to_document())?;
        let names = |ids: &[NodeId]| ids.iter().map(|&i| tree.name(i).to_string()).collect::<Vec<_>>();
        let manifest = match self {
            Model::Hier(m) => {
                let mut classifiers = Vec::new();
                for (&node, c) in &m.classifiers {
                    let file = format!("node_{node:04}.json");
                    c.mlp.to_file(names(&c.children), Some(m.config.clone())).save(dir.join(&file))?;
                    classifiers.push(ClassifierEntry {
                        node,
                        name: tree.name(node).to_string(),
                        file,
                        children: c.children.clone(),
                    });
                }
                Manifest {
                    format: BUNDLE_FORMAT.into(),
                    version: BUNDLE_VERSION,
                    kind: BundleKind::Hier,
                    feature_dim: m.feature_dim,
                    config: m.config.clone(),
                    standardizer: m.standardizer.clone(),
                    unreachable_leaves: names(&m.unreachable),
                    classifiers,
                    pass_through: m
                        .pass_through
                        .iter()
                        .map(|(&node, &child)| PassThroughEntry { node, child })
                        .collect(),
                    flat_file: None,
                }
            }
            Model::Flat(m) => {
                m.mlp
                    .to_file(names(&m.leaf_order), Some(m.config.clone()))
                    .save(dir.join(FLAT_FILE))?;
                Manifest {
                    format: BUNDLE_FORMAT.into(),
                    version: BUNDLE_VERSION,
                    kind: BundleKind::Flat,
                    feature_dim: m.feature_dim,
                    config: m.config.clone(),
                    standardizer: m.standardizer.clone(),
                    unreachable_leaves: names(&m.unreachable),
                    classifiers: Vec::new(),
                    pass_through: Vec::new(),
                    flat_file: Some(FLAT_FILE.into()),
                }
            }
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, HierError> {
        let dir = dir.as_ref();
        let tree = LabelTree::parse(&fs::read_to_string(dir.join(TREE_FILE))?)?;
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
            return Err(HierError::Bundle(format!(
                "unsupported bundle {} v{}",
                manifest.format, manifest.version
            )));
        }
        let bad = |m: String| HierError::Bundle(m);
        let check_node = |id: NodeId| tree.node(id).map(|_| ()).map_err(HierError::from);
        let unreachable = manifest
            .unreachable_leaves
            .iter()
            .map(|n| tree.leaf_id(n).map_err(HierError::from))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(s) = &manifest.standardizer {
            if s.dim() != manifest.feature_dim {
                return Err(bad("standardizer width differs from feature_dim".into()));
            }
        }
        let check_mlp = |mlp: &Mlp, outputs: usize| {
            if mlp.input_dim() != manifest.feature_dim || mlp.output_dim() != outputs {
                Err(bad("network shape does not match the manifest".into()))
            } else {
                Ok(())
            }
        };
        match manifest.kind {
            BundleKind::Hier => {
                let mut classifiers = BTreeMap::new();
                for e in &manifest.classifiers {
                    check_node(e.node)?;
                    for &c in &e.children {
                        if tree.parent(c) != Some(e.node) {
                            return Err(bad(format!("node {} is not a child of {}", c, e.node)));
                        }
                    }
                    let mlp = Mlp::from_file(&MlpFile::load(dir.join(&e.file))?)?;
                    check_mlp(&mlp, e.children.len())?;
                    classifiers.insert(e.node, NodeClassifier { mlp, children: e.children.clone() });
                }
                let mut pass_through = BTreeMap::new();
                for e in &manifest.pass_through {
                    check_node(e.node)?;
                    if tree.parent(e.child) != Some(e.node) {
                        return Err(bad(format!("node {} is not a child of {}", e.child, e.node)));
                    }
                    pass_through.insert(e.node, e.child);
                }
                Ok(Model::Hier(HierModel {
                    tree,
                    feature_dim: manifest.feature_dim,
                    classifiers,
                    pass_through,
                    unreachable,
                    standardizer: manifest.standardizer,
                    config: manifest.config,
                }))
            }
            BundleKind::Flat => {
                let file = manifest
                    .flat_file
                    .as_deref()
                    .ok_or_else(|| bad("flat bundle without flat_file".into()))?;
                let mfile = MlpFile::load(dir.join(file))?;
                let mlp = Mlp::from_file(&mfile)?;
                let leaf_order = mfile
                    .labels
                    .iter()
                    .map(|n| tree.leaf_id(n).map_err(HierError::from))
                    .collect::<Result<Vec<_>, _>>()?;
                check_mlp(&mlp, leaf_order.len())?;
                Ok(Model::Flat(FlatModel {
                    tree,
                    feature_dim: manifest.feature_dim,
                    mlp,
                    leaf_order,
                    unreachable,
                    standardizer: manifest.standardizer,
                    config: manifest.config,
                }))
            }
        }
    }
}
