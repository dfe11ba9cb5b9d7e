//! Taxonomic label hierarchy.
//!
//! Trees are written as plain text, one node per line, two spaces of
//! indentation per level:
//!
//! ```text
//! Root
//!   Corals
//!     Hard
//!       Favia
//!         Favia Gravida
//! ```
//!
//! Blank lines and lines whose first non-space character is `#` are ignored.
//! A JSON mirror (`{"name": ..., "children": [...]}`) is accepted as well.
//!
//! Node identifiers are indices in document (pre-order) order, so the root is
//! always node 0 and children are stored in the order they were written.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in document order.
pub type NodeId = usize;

const INDENT: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree document is empty")]
    Empty,
    #[error("line {line}: indentation must be a multiple of {INDENT} spaces")]
    BadIndent { line: usize },
    #[error("line {line}: node is indented deeper than its parent allows")]
    IndentJump { line: usize },
    #[error("line {line}: second depth-0 node, a tree has exactly one root")]
    MultipleRoots { line: usize },
    #[error("line {line}: empty node name")]
    EmptyName { line: usize },
    #[error("leaf name {name:?} occurs more than once")]
    DuplicateLeafName { name: String },
    #[error("node {parent:?} has two children named {name:?}")]
    DuplicateSiblingName { parent: String, name: String },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown leaf label {0:?}")]
    UnknownLabel(String),
    #[error("node {0:?} is not a leaf")]
    NotALeaf(String),
    #[error("level must be at least 1")]
    InvalidLevel,
    #[error("invalid JSON tree: {0}")]
    Json(String),
}

impl TreeError {
    pub fn code(&self) -> &'static str {
        match self {
            TreeError::Empty => "E_TREE_EMPTY",
            TreeError::BadIndent { .. } => "E_TREE_BAD_INDENT",
            TreeError::IndentJump { .. } => "E_TREE_INDENT_JUMP",
            TreeError::MultipleRoots { .. } => "E_TREE_MULTIPLE_ROOTS",
            TreeError::EmptyName { .. } => "E_TREE_EMPTY_NAME",
            TreeError::DuplicateLeafName { .. } => "E_TREE_DUPLICATE_LEAF",
            TreeError::DuplicateSiblingName { .. } => "E_TREE_DUPLICATE_SIBLING",
            TreeError::UnknownNode(_) => "E_TREE_UNKNOWN_NODE",
            TreeError::UnknownLabel(_) => "E_TREE_UNKNOWN_LABEL",
            TreeError::NotALeaf(_) => "E_TREE_NOT_A_LEAF",
            TreeError::InvalidLevel => "E_TREE_INVALID_LEVEL",
            TreeError::Json(_) => "E_TREE_JSON",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub id: NodeId,
    pub name: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted label tree. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTree {
    nodes: Vec<TreeNode>,
    leaf_index: BTreeMap<String, NodeId>,
}

/// Nested JSON form of a tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonNode {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<JsonNode>,
}

impl LabelTree {
    /// Parses an indented tree document, returning the first violation found.
    pub fn parse(text: &str) -> Result<Self, TreeError> {
        Self::parse_all(text).map_err(|mut errs| errs.remove(0))
    }

    /// Parses a tree, collecting every violation instead of stopping at the
    /// first one. The error list is never empty.
    pub fn parse_all(text: &str) -> Result<Self, Vec<TreeError>> {
        let mut errors = Vec::new();
        let mut entries: Vec<(usize, String)> = Vec::new();
        let mut seen_root = false;
        // depth of the last accepted line
        let mut prev_depth: Option<usize> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end();
            let body = trimmed.trim_start_matches(' ');
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let spaces = trimmed.len() - body.len();
            if body.starts_with('\t') || spaces % INDENT != 0 {
                errors.push(TreeError::BadIndent { line });
                continue;
            }
            let depth = spaces / INDENT;
            let name = body.trim();
            if name.is_empty() {
                errors.push(TreeError::EmptyName { line });
                continue;
            }
            if depth == 0 {
                if seen_root {
                    errors.push(TreeError::MultipleRoots { line });
                    continue;
                }
                seen_root = true;
            } else {
                match prev_depth {
                    Some(p) if depth <= p + 1 => {}
                    _ => {
                        errors.push(TreeError::IndentJump { line });
                        continue;
                    }
                }
            }
            prev_depth = Some(depth);
            entries.push((depth, name.to_string()));
        }

        if entries.is_empty() && errors.is_empty() {
            errors.push(TreeError::Empty);
        }
        if !errors.is_empty() {
            return Err(errors);
        }

        let mut nodes: Vec<TreeNode> = Vec::with_capacity(entries.len());
        let mut stack: Vec<NodeId> = Vec::new();
        for (depth, name) in entries {
            stack.truncate(depth);
            let id = nodes.len();
            let parent = stack.last().copied();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            nodes.push(TreeNode {
                id,
                name,
                parent,
                children: Vec::new(),
                depth,
            });
            stack.push(id);
        }
        Self::from_nodes(nodes)
    }

    /// Parses either the indented text form or the JSON mirror, deciding by
    /// the first non-space character.
    pub fn parse_any(text: &str) -> Result<Self, TreeError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::parse(text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let root: JsonNode =
            serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
        Self::from_json_node(&root)
    }

    pub fn from_json_node(root: &JsonNode) -> Result<Self, TreeError> {
        fn walk(node: &JsonNode, parent: Option<NodeId>, depth: usize, out: &mut Vec<TreeNode>) {
            let id = out.len();
            if let Some(p) = parent {
                out[p].children.push(id);
            }
            out.push(TreeNode {
                id,
                name: node.name.trim().to_string(),
                parent,
                children: Vec::new(),
                depth,
            });
            for child in &node.children {
                walk(child, Some(id), depth + 1, out);
            }
        }
        let mut nodes = Vec::new();
        walk(root, None, 0, &mut nodes);
        if let Some(n) = nodes.iter().find(|n| n.name.is_empty()) {
            return Err(TreeError::EmptyName { line: n.id + 1 });
        }
        Self::from_nodes(nodes).map_err(|mut errs| errs.remove(0))
    }

    fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, Vec<TreeError>> {
        let mut errors = Vec::new();
        for node in &nodes {
            let mut names = HashSet::new();
            for &c in &node.children {
                if !names.insert(nodes[c].name.as_str()) {
                    errors.push(TreeError::DuplicateSiblingName {
                        parent: node.name.clone(),
                        name: nodes[c].name.clone(),
                    });
                }
            }
        }
        let mut leaf_index = BTreeMap::new();
        let mut reported = HashSet::new();
        for node in nodes.iter().filter(|n| n.is_leaf()) {
            if leaf_index.insert(node.name.clone(), node.id).is_some()
                && reported.insert(node.name.clone())
            {
                errors.push(TreeError::DuplicateLeafName {
                    name: node.name.clone(),
                });
            }
        }
        if errors.is_empty() {
            Ok(LabelTree { nodes, leaf_index })
        } else {
            Err(errors)
        }
    }

    /// Normalized text form: two-space indentation, no comments, no blank lines.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            for _ in 0..node.depth * INDENT {
                out.push(' ');
            }
            out.push_str(&node.name);
            out.push('\n');
        }
        out
    }

    pub fn to_json_node(&self) -> JsonNode {
        fn build(tree: &LabelTree, id: NodeId) -> JsonNode {
            JsonNode {
                name: tree.nodes[id].name.clone(),
                children: tree.nodes[id].children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        build(self, self.root())
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode, TreeError> {
        self.nodes.get(id).ok_or(TreeError::UnknownNode(id))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id].depth
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].is_leaf()
    }

    /// Leaves in document order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn leaf_names(&self) -> Vec<&str> {
        self.leaves().map(|id| self.name(id)).collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Looks up a leaf by its (unique) name.
    pub fn leaf_id(&self, name: &str) -> Result<NodeId, TreeError> {
        self.leaf_index
            .get(name)
            .copied()
            .ok_or_else(|| TreeError::UnknownLabel(name.to_string()))
    }

    /// Path from the first non-root ancestor down to `id` itself. Empty for
    /// the root.
    pub fn ancestors(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        self.node(id)?;
        let mut path = Vec::with_capacity(self.nodes[id].depth);
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(cur);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Ancestor of `leaf` at depth `level`, clamped to the leaf itself when the
    /// leaf is shallower.
    pub fn ancestor_at_level(&self, leaf: NodeId, level: usize) -> Result<NodeId, TreeError> {
        let node = self.node(leaf)?;
        if !node.is_leaf() {
            return Err(TreeError::NotALeaf(node.name.clone()));
        }
        if level == 0 {
            return Err(TreeError::InvalidLevel);
        }
        let mut cur = leaf;
        while self.nodes[cur].depth > level {
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        Ok(cur)
    }

    /// Depth of the deepest common ancestor of `a` and `b` (root is depth 0).
    pub fn lca_depth(&self, a: NodeId, b: NodeId) -> Result<usize, TreeError> {
        self.node(a)?;
        self.node(b)?;
        let (mut x, mut y) = (a, b);
        while self.nodes[x].depth > self.nodes[y].depth {
            x = self.nodes[x].parent.unwrap();
        }
        while self.nodes[y].depth > self.nodes[x].depth {
            y = self.nodes[y].parent.unwrap();
        }
        while x != y {
            x = self.nodes[x].parent.unwrap();
            y = self.nodes[y].parent.unwrap();
        }
        Ok(self.nodes[x].depth)
    }

    /// Child of `ancestor` on the path to `descendant`, if `descendant` lies
    /// strictly below `ancestor`.
    pub fn child_toward(&self, ancestor: NodeId, descendant: NodeId) -> Option<NodeId> {
        let target_depth = self.nodes[ancestor].depth + 1;
        if self.nodes[descendant].depth < target_depth {
            return None;
        }
        let mut cur = descendant;
        while self.nodes[cur].depth > target_depth {
            cur = self.nodes[cur].parent?;
        }
        (self.nodes[cur].parent == Some(ancestor)).then_some(cur)
    }

    /// Leaves in the subtree rooted at `id`, in document order.
    pub fn subtree_leaves(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if self.nodes[n].is_leaf() {
                out.push(n);
            } else {
                stack.extend(self.nodes[n].children.iter().rev());
            }
        }
        out
    }

    /// Display name for a node: its plain name when no other node shares it,
    /// otherwise its path joined with `/` (root excluded).
    pub fn qualified_name(&self, id: NodeId) -> String {
        let name = &self.nodes[id].name;
        let clashes = self
            .nodes
            .iter()
            .filter(|n| n.id != id && &n.name == name)
            .count();
        if clashes == 0 || id == self.root() {
            return name.clone();
        }
        self.ancestors(id)
            .expect("id comes from this tree")
            .iter()
            .map(|&a| self.nodes[a].name.as_str())
            .collect::<Vec<_>>()
            .join("/")
    }

    /// Precomputed qualified names for every node.
    pub fn qualified_names(&self) -> Vec<String> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for n in &self.nodes {
            *counts.entry(n.name.as_str()).or_default() += 1;
        }
        (0..self.nodes.len())
            .map(|id| {
                if counts[self.nodes[id].name.as_str()] == 1 || id == self.root() {
                    self.nodes[id].name.clone()
                } else {
                    self.qualified_name(id)
                }
            })
            .collect()
    }
}

/// Lists every violation in a tree document; empty when the document is valid.
pub fn validate_document(text: &str) -> Vec<TreeError> {
    if text.trim_start().starts_with('{') {
        return LabelTree::from_json(text).err().into_iter().collect();
    }
    LabelTree::parse_all(text).err().unwrap_or_default()
}
