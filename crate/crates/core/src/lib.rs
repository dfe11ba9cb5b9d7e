//! Hierarchical classification of benthic point annotations.
//!
//! A top-down Local-Classifier-per-Parent-Node model ([`hier::HierModel`]) is
//! trained next to a flat leaf-level baseline ([`hier::FlatModel`]); both use
//! the same from-scratch MLP ([`mlp::Mlp`]). Predictions are scored with flat
//! and hierarchical F1 ([`metrics`]) and turned into cover proportions at any
//! level of the label tree ([`cover`]). [`synth`] generates tree-structured
//! Gaussian-mixture data and [`experiment`] runs paired learning curves.

pub mod cover;
pub mod dataset;
pub mod experiment;
pub mod hier;
pub mod metrics;
pub mod mlp;
pub mod synth;
pub mod tree;

use thiserror::Error;

pub use cover::{cover_at_level, cover_error, AnnotationSet, CoverError, CoverReport};
pub use dataset::{stratified_split, subsample_train, Dataset, DatasetError, Sample};
pub use experiment::{emit_results, run_learning_curve, CurveConfig, CurvePoint, ModelKind};
pub use hier::{fit_flat, fit_lcpn, FlatModel, HierError, HierModel, Model, PredictionPath};
pub use metrics::{flat_report, hier_report, severity_histogram, MetricsError, MetricsReport};
pub use mlp::{init_mlp, train_mlp, Mlp, MlpError, Optimizer, TrainConfig};
pub use synth::{gen_samples, gen_tree, SynthSpec};
pub use tree::{LabelTree, NodeId, TreeError};

/// The Rio do Fogo label hierarchy, with its header of documented deviations.
pub const BUNDLED_TREE: &str = include_str!("../assets/rio_do_fogo.tree");

/// Parses [`BUNDLED_TREE`].
pub fn bundled_tree() -> LabelTree {
    LabelTree::parse(BUNDLED_TREE).expect("bundled tree is valid")
}

/// Mixes two values into a well-spread 64-bit seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Hier(#[from] HierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
}

impl Error {
    /// Stable machine-greppable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Tree(e) => e.code(),
            Error::Dataset(e) => e.code(),
            Error::Mlp(e) => e.code(),
            Error::Hier(e) => e.code(),
            Error::Metrics(e) => e.code(),
            Error::Cover(e) => e.code(),
            Error::Synth(e) => e.code(),
            Error::Experiment(e) => e.code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
