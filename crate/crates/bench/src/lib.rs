//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reefhc::synth::SampleCounts;
use reefhc::{gen_samples, gen_tree, Dataset, LabelTree, SynthSpec};

/// Uniform features in `[-1, 1)` with random class targets.
pub fn batch(n: usize, d: usize, classes: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let y = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    (x, y)
}

/// Synthetic `[3, 3, 3]` dataset with `per_leaf` samples per leaf.
pub fn synthetic(per_leaf: usize, dim: usize) -> (LabelTree, Dataset) {
    let tree = gen_tree(&[3, 3, 3]).expect("valid branching");
    let mut spec = SynthSpec::new(tree.clone(), 1);
    spec.feature_dim = dim;
    spec.counts = SampleCounts::PerLeaf(per_leaf);
    (tree, gen_samples(&spec).expect("valid spec"))
}

/// `n` random (truth, prediction) leaf-name pairs.
pub fn label_pairs(tree: &LabelTree, n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = tree.leaf_names();
    let mut pick = || leaves[rng.gen_range(0..leaves.len())].to_string();
    let truth = (0..n).map(|_| pick()).collect();
    let pred = (0..n).map(|_| pick()).collect();
    (truth, pred)
}
