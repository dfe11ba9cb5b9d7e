#![allow(dead_code)]

use rand::Rng;
use reefhc::tree::JsonNode;
use reefhc::LabelTree;

/// Random tree with at most `max_leaves` leaves and depth at most `max_depth`.
/// Node names are `v0`, `v1`, ... so they are unique.
pub fn random_tree<R: Rng>(rng: &mut R, max_leaves: usize, max_depth: usize) -> LabelTree {
    loop {
        let n = rng.gen_range(2..=max_leaves + max_leaves / 2 + 1);
        let mut parent = vec![usize::MAX];
        let mut depth = vec![0usize];
        for _ in 1..n {
            let candidates: Vec<usize> = (0..parent.len()).filter(|&i| depth[i] < max_depth).collect();
            let p = candidates[rng.gen_range(0..candidates.len())];
            parent.push(p);
            depth.push(depth[p] + 1);
        }
        fn build(id: usize, parent: &[usize]) -> JsonNode {
            JsonNode {
                name: format!("v{id}"),
                children: (0..parent.len())
                    .filter(|&c| parent[c] == id)
                    .map(|c| build(c, parent))
                    .collect(),
            }
        }
        let tree = LabelTree::from_json_node(&build(0, &parent)).unwrap();
        if tree.leaf_count() <= max_leaves && tree.leaf_count() >= 1 && !tree.is_leaf(tree.root()) {
            return tree;
        }
    }
}
