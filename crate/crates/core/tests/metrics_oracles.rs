mod common;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reefhc::metrics::{hier_report_with, HierAveraging};
use reefhc::{flat_report, hier_report, LabelTree};

/// Augmented label set: the node and all its ancestors except the root.
fn augmented(tree: &LabelTree, mut id: usize) -> HashSet<usize> {
    let mut s = HashSet::new();
    while let Some(p) = tree.parent(id) {
        s.insert(id);
        id = p;
    }
    s
}

fn oracle(tree: &LabelTree, truth: &[usize], pred: &[usize]) -> (f64, f64, f64) {
    let (mut inter, mut np, mut nt) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        let (ts, ps) = (augmented(tree, t), augmented(tree, p));
        inter += ts.intersection(&ps).count();
        np += ps.len();
        nt += ts.len();
    }
    let hp = inter as f64 / np as f64;
    let hr = inter as f64 / nt as f64;
    let hf = if hp + hr > 0.0 { 2.0 * hp * hr / (hp + hr) } else { 0.0 };
    (hp, hr, hf)
}

#[test]
fn hierarchical_scores_match_explicit_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let tree = common::random_tree(&mut rng, 50, 5);
        let leaves: Vec<usize> = tree.leaves().collect();
        let n = rng.gen_range(1..=500);
        let pick = |rng: &mut ChaCha8Rng| leaves[rng.gen_range(0..leaves.len())];
        let t: Vec<usize> = (0..n).map(|_| pick(&mut rng)).collect();
        let p: Vec<usize> = (0..n).map(|_| pick(&mut rng)).collect();
        let tn: Vec<&str> = t.iter().map(|&i| tree.name(i)).collect();
        let pn: Vec<&str> = p.iter().map(|&i| tree.name(i)).collect();
        let s = hier_report(&tree, &tn, &pn).unwrap();
        let (hp, hr, hf) = oracle(&tree, &t, &p);
        assert!((s.h_precision - hp).abs() < 1e-12);
        assert!((s.h_recall - hr).abs() < 1e-12);
        assert!((s.h_f1 - hf).abs() < 1e-12);
        for v in [s.h_precision, s.h_recall, s.h_f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(s.h_f1 <= s.h_precision.max(s.h_recall) + 1e-15);
        let per = hier_report_with(&tree, &tn, &pn, HierAveraging::PerSample).unwrap();
        assert!((0.0..=1.0).contains(&per.h_f1));
    }
}

#[test]
fn deeper_agreement_scores_higher() {
    // same true leaf, two predictions of equal depth: deeper LCA wins
    let tree = LabelTree::parse(
        "Root\n  A\n    B\n      t\n      p1\n    C\n      p2\n  D\n    E\n      p3",
    )
    .unwrap();
    let f = |p: &str| hier_report(&tree, &["t"], &[p]).unwrap().h_f1;
    assert!(f("p1") > f("p2"));
    assert!(f("p2") > f("p3"));
}

#[test]
fn flat_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels = ["a", "b", "c", "d"];
    for _ in 0..50 {
        let n = rng.gen_range(1..100);
        let t: Vec<&str> = (0..n).map(|_| labels[rng.gen_range(0..4)]).collect();
        let p: Vec<&str> = (0..n).map(|_| labels[rng.gen_range(0..4)]).collect();
        let r = flat_report(&t, &p, &labels).unwrap();
        assert!((r.micro_f1 - r.accuracy).abs() < 1e-15);
        assert_eq!(r.per_class.iter().map(|c| c.support).sum::<usize>(), n);
        for c in &r.per_class {
            assert!((0.0..=1.0).contains(&c.f1));
        }
    }
}
