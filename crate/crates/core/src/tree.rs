//! Rooted, time-calibrated phylogeny.
//!
//! A [`PhyloTree`] is immutable once built. Node ids are preorder indices, so
//! the root is always `NodeId(0)` and the subtree of `v` occupies the
//! contiguous id range `v..subtree_end(v)`. Times run forward from the root
//! (time 0) to the present (the deepest leaf).

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("missing branch length above node '{node}'")]
    MissingBranchLength { node: String },
    #[error("branch above node '{node}' has non-positive length {length}")]
    NonPositiveBranchLength { node: String, length: f64 },
    #[error("duplicate node label '{0}'")]
    DuplicateLabel(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("unknown leaf '{0}'")]
    UnknownLeaf(String),
    #[error("'{ancestor}' is not an ancestor of '{node}'")]
    NotAnAncestor { ancestor: String, node: String },
    #[error("malformed node table: {0}")]
    Structure(String),
}

/// One row of a node table handed to [`PhyloTree::from_nodes`].
///
/// `parent` indexes into the same table. Exactly one row has no parent.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub label: Option<String>,
    pub parent: Option<usize>,
    pub branch_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub label: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Length of the edge above this node; 0 for the root.
    pub branch_length: f64,
    /// Cumulative branch length from the root.
    pub time: f64,
    /// Number of edges from the root.
    pub depth: u32,
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    root_length: Option<f64>,
    by_label: HashMap<String, NodeId>,
    leaves: Vec<NodeId>,
    subtree_end: Vec<usize>,
    present: f64,
    lca: LcaIndex,
}

impl PartialEq for PhyloTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.root_length == other.root_length
    }
}

/// Prefix used for generated internal-node names.
pub const AUTO_NAME_PREFIX: &str = "_in";

impl PhyloTree {
    /// Builds a tree from a node table in any order where a node's parent is
    /// reachable from the root. Nodes are renumbered into preorder, keeping the
    /// relative order of siblings. Unlabeled internal nodes are named
    /// `_in<preorder index>`.
    pub fn from_nodes(specs: Vec<NodeSpec>, root_length: Option<f64>) -> Result<Self, TreeError> {
        if specs.is_empty() {
            return Err(TreeError::Structure("empty node table".into()));
        }
        let mut root = None;
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
        for (i, s) in specs.iter().enumerate() {
            match s.parent {
                None if root.is_some() => {
                    return Err(TreeError::Structure("more than one root".into()));
                }
                None => root = Some(i),
                Some(p) if p >= specs.len() || p == i => {
                    return Err(TreeError::Structure(format!("node {i} has invalid parent {p}")));
                }
                Some(p) => kids[p].push(i),
            }
        }
        let root = root.ok_or_else(|| TreeError::Structure("no root".into()))?;

        // Preorder renumbering; an unreachable node means a cycle.
        let mut order = Vec::with_capacity(specs.len());
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(kids[v].iter().rev());
        }
        if order.len() != specs.len() {
            return Err(TreeError::Structure("node table contains a cycle".into()));
        }
        let mut new_id = vec![0usize; specs.len()];
        for (pre, &old) in order.iter().enumerate() {
            new_id[old] = pre;
        }

        let mut nodes: Vec<Node> = Vec::with_capacity(specs.len());
        let mut by_label = HashMap::with_capacity(specs.len());
        for (pre, &old) in order.iter().enumerate() {
            let spec = &specs[old];
            let children: Vec<NodeId> = kids[old].iter().map(|&c| NodeId(new_id[c])).collect();
            let label = match &spec.label {
                Some(l) if !l.is_empty() => l.clone(),
                _ if !children.is_empty() => format!("{AUTO_NAME_PREFIX}{pre}"),
                _ => return Err(TreeError::Structure(format!("leaf at preorder index {pre} has no label"))),
            };
            if by_label.insert(label.clone(), NodeId(pre)).is_some() {
                return Err(TreeError::DuplicateLabel(label));
            }
            let (parent, branch_length, time, depth) = match spec.parent {
                None => (None, 0.0, 0.0, 0),
                Some(p) => {
                    let bl = spec
                        .branch_length
                        .ok_or_else(|| TreeError::MissingBranchLength { node: label.clone() })?;
                    if !(bl > 0.0 && bl.is_finite()) {
                        return Err(TreeError::NonPositiveBranchLength { node: label, length: bl });
                    }
                    let parent = &nodes[new_id[p]];
                    (Some(NodeId(new_id[p])), bl, parent.time + bl, parent.depth + 1)
                }
            };
            nodes.push(Node { label, parent, children, branch_length, time, depth });
        }
        if let Some(l) = root_length {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(TreeError::NonPositiveBranchLength { node: nodes[0].label.clone(), length: l });
            }
        }

        let mut subtree_end = vec![0usize; nodes.len()];
        for v in (0..nodes.len()).rev() {
            subtree_end[v] = nodes[v].children.last().map_or(v + 1, |c| subtree_end[c.0]);
        }
        let leaves: Vec<NodeId> = (0..nodes.len()).filter(|&v| nodes[v].is_leaf()).map(NodeId).collect();
        let present = leaves.iter().map(|l| nodes[l.0].time).fold(0.0, f64::max);
        let lca = LcaIndex::build(&nodes);
        Ok(Self { nodes, root_length, by_label, leaves, subtree_end, present, lca })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Branch length written above the root in the source, if any.
    pub fn root_length(&self) -> Option<f64> {
        self.root_length
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Leaves in preorder.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().filter(move |&v| !self.is_leaf(v))
    }

    #[inline]
    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.0].label
    }

    #[inline]
    pub fn time(&self, id: NodeId) -> f64 {
        self.nodes[id.0].time
    }

    #[inline]
    pub fn depth(&self, id: NodeId) -> u32 {
        self.nodes[id.0].depth
    }

    #[inline]
    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].is_leaf()
    }

    #[inline]
    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn id_of(&self, label: &str) -> Option<NodeId> {
        self.by_label.get(label).copied()
    }

    pub fn require(&self, label: &str) -> Result<NodeId, TreeError> {
        self.id_of(label).ok_or_else(|| TreeError::UnknownNode(label.to_string()))
    }

    pub fn require_leaf(&self, label: &str) -> Result<NodeId, TreeError> {
        match self.id_of(label) {
            Some(id) if self.is_leaf(id) => Ok(id),
            _ => Err(TreeError::UnknownLeaf(label.to_string())),
        }
    }

    /// Maximum leaf time. Equal to every leaf time when the tree is ultrametric.
    pub fn present_time(&self) -> f64 {
        self.present
    }

    /// Ids of the subtree rooted at `id`, in preorder.
    pub fn subtree(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        (id.0..self.subtree_end[id.0]).map(NodeId)
    }

    /// True when `ancestor` is `node` or lies on its root path.
    #[inline]
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        ancestor.0 <= node.0 && node.0 < self.subtree_end[ancestor.0]
    }

    /// Most recent common ancestor of two nodes, in O(1).
    #[inline]
    pub fn mrca(&self, a: NodeId, b: NodeId) -> NodeId {
        self.lca.query(a, b)
    }

    /// Most recent common ancestor of two leaves given by label.
    pub fn mrca_of_leaves(&self, a: &str, b: &str) -> Result<NodeId, TreeError> {
        Ok(self.mrca(self.require_leaf(a)?, self.require_leaf(b)?))
    }

    /// Collective MRCA of a non-empty set of nodes.
    pub fn mrca_of_set(&self, ids: impl IntoIterator<Item = NodeId>) -> Option<NodeId> {
        ids.into_iter().reduce(|acc, v| self.mrca(acc, v))
    }

    /// Nodes from `ancestor` down to `node`, both inclusive.
    pub fn path_from(&self, ancestor: NodeId, node: NodeId) -> Result<Vec<NodeId>, TreeError> {
        if !self.is_ancestor_or_self(ancestor, node) {
            return Err(TreeError::NotAnAncestor {
                ancestor: self.label(ancestor).to_string(),
                node: self.label(node).to_string(),
            });
        }
        let mut path = Vec::with_capacity((self.depth(node) - self.depth(ancestor)) as usize + 1);
        let mut cur = node;
        path.push(cur);
        while cur != ancestor {
            cur = self.nodes[cur.0].parent.expect("ancestor check guarantees a parent");
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Number of edges on the path between two nodes.
    #[inline]
    pub fn topo_edges(&self, a: NodeId, b: NodeId) -> u32 {
        let m = self.mrca(a, b);
        self.depth(a) + self.depth(b) - 2 * self.depth(m)
    }

    pub fn topo_edges_of_leaves(&self, a: &str, b: &str) -> Result<u32, TreeError> {
        Ok(self.topo_edges(self.require_leaf(a)?, self.require_leaf(b)?))
    }

    /// Nested view used by the JSON API.
    pub fn to_nested(&self) -> NestedNode {
        fn build(tree: &PhyloTree, id: NodeId) -> NestedNode {
            let n = tree.node(id);
            NestedNode {
                id: n.label.clone(),
                time: n.time,
                branch_length: n.branch_length,
                children: n.children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        build(self, self.root())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestedNode {
    pub id: String,
    pub time: f64,
    pub branch_length: f64,
    pub children: Vec<NestedNode>,
}

/// Euler tour plus a sparse table over first-visit depths.
#[derive(Clone, Debug, Default)]
struct LcaIndex {
    first: Vec<u32>,
    depth_of_tour: Vec<u32>,
    node_of_tour: Vec<u32>,
    table: Vec<Vec<u32>>,
}

impl LcaIndex {
    fn build(nodes: &[Node]) -> Self {
        let n = nodes.len();
        let mut first = vec![0u32; n];
        let mut node_of_tour = Vec::with_capacity(2 * n);
        let mut depth_of_tour = Vec::with_capacity(2 * n);
        // (node, next child position)
        let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
        first[0] = 0;
        node_of_tour.push(0);
        depth_of_tour.push(0);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&c) = nodes[v].children.get(*next) {
                *next += 1;
                first[c.0] = node_of_tour.len() as u32;
                node_of_tour.push(c.0 as u32);
                depth_of_tour.push(nodes[c.0].depth);
                stack.push((c.0, 0));
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    node_of_tour.push(p as u32);
                    depth_of_tour.push(nodes[p].depth);
                }
            }
        }

        let m = node_of_tour.len();
        let mut table: Vec<Vec<u32>> = vec![(0..m as u32).collect()];
        let mut span = 1;
        while 2 * span <= m {
            let prev = table.last().unwrap();
            let row: Vec<u32> = (0..=m - 2 * span)
                .map(|i| {
                    let (x, y) = (prev[i], prev[i + span]);
                    if depth_of_tour[y as usize] < depth_of_tour[x as usize] { y } else { x }
                })
                .collect();
            table.push(row);
            span *= 2;
        }
        Self { first, depth_of_tour, node_of_tour, table }
    }

    #[inline]
    fn query(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut l, mut r) = (self.first[a.0] as usize, self.first[b.0] as usize);
        if l > r {
            std::mem::swap(&mut l, &mut r);
        }
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let row = &self.table[k];
        let (x, y) = (row[l], row[r + 1 - (1 << k)]);
        let best = if self.depth_of_tour[y as usize] < self.depth_of_tour[x as usize] { y } else { x };
        NodeId(self.node_of_tour[best as usize] as usize)
    }
}
