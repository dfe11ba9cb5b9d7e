//! Tree-structured Gaussian-mixture datasets.
//!
//! Node means are built top-down: the root sits at the origin and every child
//! is displaced from its parent by `level_spread[depth - 1]` times a standard
//! normal vector. Samples of a leaf are its mean plus `noise_sigma` times a
//! standard normal vector. With decreasing spreads, siblings end up closer
//! to each other than to cousins, so the feature geometry mirrors the tree.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dataset::{Dataset, Sample};
use crate::tree::{LabelTree, NodeId};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("branching factors must be non-empty and positive")]
    InvalidBranching,
    #[error("level_spread has {found} entries but the tree is {needed} levels deep")]
    SpreadTooShort { needed: usize, found: usize },
    #[error("invalid synthesis parameter: {0}")]
    InvalidParameter(String),
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::InvalidBranching => "E_SYNTH_INVALID_BRANCHING",
            SynthError::SpreadTooShort { .. } => "E_SYNTH_SPREAD_TOO_SHORT",
            SynthError::InvalidParameter(_) => "E_SYNTH_INVALID_PARAMETER",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleCounts {
    /// The same number of samples for every leaf.
    PerLeaf(usize),
    /// `total` samples spread over leaves with weight `rank^-alpha`; leaf
    /// ranks are a seeded random permutation.
    PowerLaw { total: usize, alpha: f64 },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub tree: LabelTree,
    pub feature_dim: usize,
    pub level_spread: Vec<f64>,
    /// Scale child displacements to unit length before applying the level
    /// spread, so `level_spread[l]` is the exact parent-to-child distance.
    /// When false the raw `N(0, I)` draw is used and distances grow with
    /// `sqrt(feature_dim)`.
    pub unit_displacement: bool,
    /// Per-dimension standard deviation of sample noise.
    pub noise_sigma: f64,
    pub counts: SampleCounts,
    pub seed: u64,
}

impl SynthSpec {
    /// Defaults: unit displacements, `d = 64`, spreads `[3, 2, 1, ...]`
    /// (floored at 1), noise 1, 50 samples per leaf.
    pub fn new(tree: LabelTree, seed: u64) -> Self {
        let depth = tree.max_depth();
        SynthSpec {
            tree,
            feature_dim: 64,
            level_spread: (0..depth).map(|l| (3.0 - l as f64).max(1.0)).collect(),
            unit_displacement: true,
            noise_sigma: 1.0,
            counts: SampleCounts::PerLeaf(50),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParameter(m.to_string()));
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive");
        }
        let needed = self.tree.max_depth();
        if self.level_spread.len() < needed {
            return Err(SynthError::SpreadTooShort {
                needed,
                found: self.level_spread.len(),
            });
        }
        if self.level_spread.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("level_spread entries must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if let SampleCounts::PowerLaw { total, alpha } = self.counts {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return bad("alpha must be non-negative");
            }
            if total < self.tree.leaf_count() {
                return bad("power-law total must give every leaf at least one sample");
            }
        }
        if self.level_spread.windows(2).any(|w| w[1] >= w[0]) {
            log::warn!("level_spread is not strictly decreasing; the hierarchy may not be visible in feature space");
        }
        Ok(())
    }
}

/// Complete tree with `branching[l]` children at every node of depth `l`.
/// Node names spell their path, e.g. `n2.1` is the first child of `n2`.
pub fn gen_tree(branching: &[usize]) -> Result<LabelTree, SynthError> {
    if branching.is_empty() || branching.contains(&0) {
        return Err(SynthError::InvalidBranching);
    }
    fn emit(branching: &[usize], prefix: &str, depth: usize, out: &mut String) {
        if depth > branching.len() {
            return;
        }
        for i in 1..=branching[depth - 1] {
            let name = if prefix.is_empty() {
                format!("n{i}")
            } else {
                format!("{prefix}.{i}")
            };
            out.push_str(&" ".repeat(depth * 2));
            out.push_str(&name);
            out.push('\n');
            emit(branching, &name, depth + 1, out);
        }
    }
    let mut doc = String::from("root\n");
    emit(branching, "", 1, &mut doc);
    Ok(LabelTree::parse(&doc).expect("generated tree is valid"))
}

/// Per-rank counts summing to `total`: proportional to `rank^-alpha`, at least
/// one each, rounded by largest remainder (ties to the better rank).
pub fn power_law_counts(n: usize, total: usize, alpha: f64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
    let wsum: f64 = weights.iter().sum();
    let spare = total.saturating_sub(n) as f64;
    let shares: Vec<f64> = weights.iter().map(|w| w / wsum * spare).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| 1 + s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Share of the total weight held by the `head` best ranks out of `n`.
pub fn head_share(n: usize, head: usize, alpha: f64) -> f64 {
    let w = |r: usize| (r as f64).powf(-alpha);
    let top: f64 = (1..=head.min(n)).map(w).sum();
    let all: f64 = (1..=n).map(w).sum();
    top / all
}

/// Smallest exponent (to 1e-9) for which the `head` best of `n` ranks hold at
/// least `share` of the weight. `head_share` is increasing in alpha.
pub fn alpha_for_head_share(n: usize, head: usize, share: f64) -> Result<f64, SynthError> {
    if head == 0 || head >= n || !(share > 0.0 && share < 1.0) {
        return Err(SynthError::InvalidParameter("need 0 < head < n and 0 < share < 1".into()));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while head_share(n, head, hi) < share {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(SynthError::InvalidParameter("share not reachable".into()));
        }
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if head_share(n, head, mid) >= share {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| StandardNormal.sample(rng))
}

/// Mean vector of every node, indexed by node id.
pub fn node_means(spec: &SynthSpec) -> Result<Vec<Array1<f64>>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(means_with(spec, &mut rng))
}

fn means_with(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Array1<f64>> {
    let tree = &spec.tree;
    let d = spec.feature_dim;
    let mut means: Vec<Array1<f64>> = Vec::with_capacity(tree.len());
    // document order lists every parent before its children
    for node in tree.nodes() {
        let mean = match node.parent {
            None => Array1::zeros(d),
            Some(p) => {
                let mut step = gaussian(rng, d);
                if spec.unit_displacement {
                    let norm = step.dot(&step).sqrt();
                    step /= norm;
                }
                &means[p] + &(step * spec.level_spread[node.depth - 1])
            }
        };
        means.push(mean);
    }
    means
}

/// Generates the dataset described by `spec`. Rows are shuffled and then
/// grouped into pseudo-images of 25 points (`synth_00000`, ...).
pub fn gen_samples(spec: &SynthSpec) -> Result<Dataset, SynthError> {
    spec.validate()?;
    let tree = &spec.tree;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = means_with(spec, &mut rng);

    let leaves: Vec<NodeId> = tree.leaves().collect();
    let counts: Vec<usize> = match spec.counts {
        SampleCounts::PerLeaf(n) => vec![n; leaves.len()],
        SampleCounts::PowerLaw { total, alpha } => {
            let by_rank = power_law_counts(leaves.len(), total, alpha);
            let mut rank: Vec<usize> = (0..leaves.len()).collect();
            rank.shuffle(&mut rng);
            rank.iter().map(|&r| by_rank[r]).collect()
        }
    };

    let mut rows: Vec<(NodeId, Vec<f64>)> = Vec::with_capacity(counts.iter().sum());
    for (&leaf, &count) in leaves.iter().zip(&counts) {
        for _ in 0..count {
            let x = &means[leaf] + &(gaussian(&mut rng, spec.feature_dim) * spec.noise_sigma);
            rows.push((leaf, x.to_vec()));
        }
    }
    rows.shuffle(&mut rng);
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (leaf, features))| Sample {
            image_id: format!("synth_{:05}", i / 25),
            point_id: (i % 25) as u32,
            label: tree.name(leaf).to_string(),
            features,
        })
        .collect();
    Ok(Dataset::new(samples, spec.feature_dim, Some(tree)).expect("generated rows are consistent"))
}
