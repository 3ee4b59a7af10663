//! Category hierarchy and its structural transformations.
//!
//! A [`Taxonomy`] is a rooted tree over integer node ids. The root sits at
//! level 0, its children at level 1, and so on. Examples are only ever
//! attached to leaves. Every transformation returns a new value; a
//! taxonomy is never mutated after construction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    root: NodeId,
    parent: BTreeMap<NodeId, NodeId>,
    // every node has an entry; lists are kept in ascending id order
    children: BTreeMap<NodeId, Vec<NodeId>>,
    level: BTreeMap<NodeId, usize>,
    leaves: BTreeSet<NodeId>,
}

/// How a [`FlatteningPlan`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlattenMethod {
    LevelInf,
    GlobalInf,
    Tlf,
    Blf,
    Mlf,
    Manual,
}

impl FlattenMethod {
    pub fn name(self) -> &'static str {
        match self {
            FlattenMethod::LevelInf => "level-inf",
            FlattenMethod::GlobalInf => "global-inf",
            FlattenMethod::Tlf => "tlf",
            FlattenMethod::Blf => "blf",
            FlattenMethod::Mlf => "mlf",
            FlattenMethod::Manual => "manual",
        }
    }
}

/// Threshold bookkeeping for a node considered by an inconsistency selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeProvenance {
    pub level: usize,
    pub fstar: f64,
    pub tau: f64,
    pub flagged: bool,
}

/// A set of internal nodes to remove in one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatteningPlan {
    pub removed: BTreeSet<NodeId>,
    pub method: FlattenMethod,
    pub provenance: BTreeMap<NodeId, NodeProvenance>,
}

impl FlatteningPlan {
    pub fn new(method: FlattenMethod, removed: impl IntoIterator<Item = NodeId>) -> Self {
        FlatteningPlan {
            removed: removed.into_iter().collect(),
            method,
            provenance: BTreeMap::new(),
        }
    }

    pub fn manual(removed: impl IntoIterator<Item = NodeId>) -> Self {
        Self::new(FlattenMethod::Manual, removed)
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }
}

impl Taxonomy {
    /// Builds and validates a taxonomy from `(parent, child)` edges.
    ///
    /// The root is the unique node that never appears as a child. Levels are
    /// assigned breadth-first from the root.
    pub fn from_edges(edges: &[(NodeId, NodeId)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyHierarchy);
        }
        let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut children: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &(p, c) in edges {
            if p == c {
                return Err(Error::SelfEdge(p));
            }
            if let Some(&first) = parent.get(&c) {
                if first == p {
                    // repeated edge
                    continue;
                }
                return Err(Error::TwoParents {
                    node: c,
                    first,
                    second: p,
                });
            }
            parent.insert(c, p);
            children.entry(p).or_default().push(c);
            children.entry(c).or_default();
        }
        for list in children.values_mut() {
            list.sort_unstable();
        }

        let roots: Vec<NodeId> = children
            .keys()
            .copied()
            .filter(|n| !parent.contains_key(n))
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            // every node has a parent, so the graph is one or more cycles
            [] => return Err(Error::Cycle(edges[0].0)),
            _ => return Err(Error::MultipleRoots(roots)),
        };

        let mut level = BTreeMap::new();
        let mut queue = VecDeque::from([(root, 0usize)]);
        while let Some((n, k)) = queue.pop_front() {
            level.insert(n, k);
            for &c in &children[&n] {
                queue.push_back((c, k + 1));
            }
        }
        if level.len() != children.len() {
            // unreachable nodes all have a parent, hence sit on a cycle
            let stray = children
                .keys()
                .find(|n| !level.contains_key(n))
                .copied()
                .unwrap_or(root);
            return Err(Error::Cycle(stray));
        }

        let leaves = children
            .iter()
            .filter(|(_, c)| c.is_empty())
            .map(|(&n, _)| n)
            .collect();
        Ok(Taxonomy {
            root,
            parent,
            children,
            level,
            leaves,
        })
    }

    /// Parses the edge-list text format: one `parent child` pair per line,
    /// blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(p), Some(c), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(i + 1, "expected `parent child`"));
            };
            let p = p
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad node id `{p}`")))?;
            let c = c
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad node id `{c}`")))?;
            edges.push((p, c));
        }
        Self::from_edges(&edges)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Edges in breadth-first order, children ascending.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.parent.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            for &c in &self.children[&n] {
                out.push((n, c));
                queue.push_back(c);
            }
        }
        out
    }

    pub fn to_edge_text(&self) -> String {
        let mut s = String::new();
        for (p, c) in self.edges() {
            let _ = writeln!(s, "{p} {c}");
        }
        s
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.children.contains_key(&n)
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(&n).copied()
    }

    pub fn children(&self, n: NodeId) -> &[NodeId] {
        self.children.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn level(&self, n: NodeId) -> Option<usize> {
        self.level.get(&n).copied()
    }

    pub fn leaves(&self) -> &BTreeSet<NodeId> {
        &self.leaves
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.leaves.contains(&n)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// All nodes including the root, ascending.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.keys().copied()
    }

    /// Every node except the root, ascending. These are the nodes that carry
    /// a binary classifier.
    pub fn non_root_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        let root = self.root;
        self.nodes().filter(move |&n| n != root)
    }

    /// Non-root nodes with at least one child.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.non_root_nodes().filter(|n| !self.leaves.contains(n))
    }

    pub fn nodes_at_level(&self, k: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.level
            .iter()
            .filter(move |(_, &l)| l == k)
            .map(|(&n, _)| n)
    }

    /// Maximum level of any node.
    pub fn depth(&self) -> usize {
        self.level.values().copied().max().unwrap_or(0)
    }

    /// Path `root, …, n`.
    pub fn path_from_root(&self, n: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(n) {
            return Err(Error::UnknownNode(n));
        }
        let mut path = vec![n];
        let mut cur = n;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Ancestors of `n` including `n` itself but excluding the root.
    pub fn ancestors(&self, n: NodeId) -> Result<Vec<NodeId>> {
        let mut path = self.path_from_root(n)?;
        path.remove(0);
        Ok(path)
    }

    /// True when `a` lies on the path from the root to `b` (a node is its own
    /// ancestor).
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        while let Some(n) = cur {
            if n == a {
                return true;
            }
            cur = self.parent(n);
        }
        false
    }

    pub fn lowest_common_ancestor(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let mut la = self.level(a).ok_or(Error::UnknownNode(a))?;
        let mut lb = self.level(b).ok_or(Error::UnknownNode(b))?;
        let (mut a, mut b) = (a, b);
        while la > lb {
            a = self.parent[&a];
            la -= 1;
        }
        while lb > la {
            b = self.parent[&b];
            lb -= 1;
        }
        while a != b {
            a = self.parent[&a];
            b = self.parent[&b];
        }
        Ok(a)
    }

    /// Number of edges on the undirected tree path between `a` and `b`.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<usize> {
        let lca = self.lowest_common_ancestor(a, b)?;
        let l = self.level[&lca];
        Ok(self.level[&a] + self.level[&b] - 2 * l)
    }

    /// Leaves in the subtree rooted at `n` (including `n` if it is a leaf).
    pub fn descendant_leaves(&self, n: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![n];
        while let Some(v) = stack.pop() {
            let ch = self.children(v);
            if ch.is_empty() {
                out.push(v);
            } else {
                stack.extend(ch.iter().rev());
            }
        }
        out.sort_unstable();
        out
    }

    /// Removes every node in `plan.removed` at once. Each surviving node is
    /// re-parented to its nearest original ancestor that survives.
    pub fn flatten(&self, plan: &FlatteningPlan) -> Result<Taxonomy> {
        for &n in &plan.removed {
            if !self.contains(n) {
                return Err(Error::UnknownNode(n));
            }
            if n == self.root {
                return Err(Error::InvalidPlan {
                    node: n,
                    reason: "the root cannot be flattened",
                });
            }
            if self.is_leaf(n) {
                return Err(Error::InvalidPlan {
                    node: n,
                    reason: "leaves cannot be flattened",
                });
            }
        }
        if plan.removed.is_empty() {
            return Ok(self.clone());
        }
        let edges: Vec<(NodeId, NodeId)> = self
            .non_root_nodes()
            .filter(|n| !plan.removed.contains(n))
            .map(|n| {
                let mut p = self.parent[&n];
                while plan.removed.contains(&p) {
                    p = self.parent[&p];
                }
                (p, n)
            })
            .collect();
        Taxonomy::from_edges(&edges)
    }

    /// Removes every internal node whose level is in `levels`.
    ///
    /// Each selected level must contain at least one internal (non-leaf,
    /// non-root) node.
    pub fn level_flatten(&self, levels: &BTreeSet<usize>) -> Result<Taxonomy> {
        self.flatten(&self.level_plan(levels, FlattenMethod::Manual)?)
    }

    fn level_plan(&self, levels: &BTreeSet<usize>, method: FlattenMethod) -> Result<FlatteningPlan> {
        if levels.is_empty() {
            return Err(Error::InvalidLevels("no levels selected".into()));
        }
        let mut removed = BTreeSet::new();
        for &k in levels {
            if k == 0 {
                return Err(Error::InvalidLevels("level 0 is the root".into()));
            }
            let before = removed.len();
            removed.extend(self.nodes_at_level(k).filter(|n| !self.is_leaf(*n)));
            if removed.len() == before {
                return Err(Error::InvalidLevels(format!(
                    "level {k} has no internal nodes (taxonomy depth {})",
                    self.depth()
                )));
            }
        }
        Ok(FlatteningPlan::new(method, removed))
    }

    /// Deepest level holding an internal non-root node, if any.
    pub fn deepest_internal_level(&self) -> Option<usize> {
        self.internal_nodes().map(|n| self.level[&n]).max()
    }

    /// Top-level flattening: removes all internal nodes at level 1.
    pub fn tlf_plan(&self) -> Result<FlatteningPlan> {
        self.level_plan(&BTreeSet::from([1]), FlattenMethod::Tlf)
    }

    /// Bottom-level flattening: removes the deepest internal layer.
    pub fn blf_plan(&self) -> Result<FlatteningPlan> {
        let k = self
            .deepest_internal_level()
            .ok_or_else(|| Error::InvalidLevels("taxonomy has no internal nodes".into()))?;
        self.level_plan(&BTreeSet::from([k]), FlattenMethod::Blf)
    }

    /// Multi-level flattening of levels one and three. Requires depth ≥ 4.
    pub fn mlf_plan(&self) -> Result<FlatteningPlan> {
        self.level_plan(&BTreeSet::from([1, 3]), FlattenMethod::Mlf)
            .map_err(|_| {
                Error::InvalidLevels(format!(
                    "MLF not possible on a taxonomy of depth {}",
                    self.depth()
                ))
            })
    }

    /// Total number of children held by the nodes of each level.
    pub fn fanout_profile(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (n, ch) in &self.children {
            if !ch.is_empty() {
                *out.entry(self.level[n]).or_insert(0) += ch.len();
            }
        }
        out
    }
}
