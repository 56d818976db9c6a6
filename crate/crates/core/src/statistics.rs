//! Path functionals: local times, oriented crossings, currents, last-exit
//! trees, and the tree-shifted current `ã`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedEdgeId, VertexId, WeightedGraph};
use crate::simulate::JumpPath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("TreeNotSpanning: tree covers {covered} of {n} vertices")]
    TreeNotSpanning { covered: usize, n: usize },
    #[error("InvalidTree: {0}")]
    InvalidTree(String),
    #[error("InvalidCurrent: {0}")]
    InvalidCurrent(String),
}

/// Occupation time of every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimes(pub Vec<f64>);

impl LocalTimes {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&l| l > 0.0)
    }
}

/// Number of jumps along every directed edge, indexed like
/// [`WeightedGraph::directed_edges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrossingCounts(pub Vec<u64>);

/// Antisymmetric integer function on directed edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Current(pub Vec<i64>);

impl Current {
    pub fn zero(g: &WeightedGraph) -> Self {
        Current(vec![0; g.num_directed()])
    }

    /// Builds a current from values on one orientation of each listed edge.
    pub fn from_oriented(
        g: &WeightedGraph,
        values: &[(VertexId, VertexId, i64)],
    ) -> Result<Self, StatsError> {
        let mut a = Self::zero(g);
        let mut set = vec![false; g.num_directed()];
        for &(i, j, v) in values {
            let d = g
                .directed_index(i, j)
                .ok_or_else(|| StatsError::InvalidCurrent(format!("({i}, {j}) is not an edge")))?;
            let r = g.reverse(d);
            if (set[d] && a.0[d] != v) || (set[r] && a.0[r] != -v) {
                return Err(StatsError::InvalidCurrent(format!(
                    "conflicting values on edge ({i}, {j})"
                )));
            }
            a.0[d] = v;
            a.0[r] = -v;
            set[d] = true;
            set[r] = true;
        }
        Ok(a)
    }

    pub fn get(&self, g: &WeightedGraph, i: VertexId, j: VertexId) -> Option<i64> {
        g.directed_index(i, j).map(|d| self.0[d])
    }

    pub fn is_antisymmetric(&self, g: &WeightedGraph) -> bool {
        self.0.len() == g.num_directed()
            && (0..self.0.len()).all(|d| self.0[d] == -self.0[g.reverse(d)])
    }

    /// Net outflow `a_i = sum_{j ~ i} a_ij`.
    pub fn divergence(&self, g: &WeightedGraph) -> Vec<i64> {
        let mut div = vec![0i64; g.n()];
        for (d, &(i, _)) in g.directed_edges().iter().enumerate() {
            div[i] += self.0[d];
        }
        div
    }

    /// True when the divergence equals `δ_{i0} - δ_{i1}`.
    pub fn has_boundary(&self, g: &WeightedGraph, i0: VertexId, i1: VertexId) -> bool {
        self.divergence(g)
            .iter()
            .enumerate()
            .all(|(i, &d)| d == i64::from(i == i0) - i64::from(i == i1))
    }
}

/// Oriented tree on a subset of the vertices: every member other than the
/// root has exactly one outgoing edge, and following them reaches the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrientedTree {
    root: VertexId,
    next: Vec<Option<VertexId>>,
    members: Vec<bool>,
}

impl OrientedTree {
    /// Single-vertex tree with no edges.
    pub fn singleton(n: usize, root: VertexId) -> Self {
        let mut members = vec![false; n];
        members[root] = true;
        Self { root, next: vec![None; n], members }
    }

    /// Validates and builds a tree spanning exactly the endpoints of `edges`
    /// plus the root.
    pub fn from_edges(
        g: &WeightedGraph,
        root: VertexId,
        edges: &[(VertexId, VertexId)],
    ) -> Result<Self, StatsError> {
        let n = g.n();
        if root >= n {
            return Err(StatsError::InvalidTree(format!("root {root} out of range")));
        }
        let mut tree = Self::singleton(n, root);
        for &(i, j) in edges {
            if i >= n || j >= n || g.weight(i, j).is_none() {
                return Err(StatsError::InvalidTree(format!("({i}, {j}) is not a graph edge")));
            }
            if i == root {
                return Err(StatsError::InvalidTree(format!("root {root} has an outgoing edge")));
            }
            if tree.next[i].is_some() {
                return Err(StatsError::InvalidTree(format!("vertex {i} has two outgoing edges")));
            }
            tree.next[i] = Some(j);
            tree.members[i] = true;
            tree.members[j] = true;
        }
        for v in 0..n {
            if tree.members[v] && v != root && tree.next[v].is_none() {
                return Err(StatsError::InvalidTree(format!("vertex {v} has no outgoing edge")));
            }
        }
        tree.check_acyclic()?;
        Ok(tree)
    }

    /// Builds from a parent map (`next[v]` is the head of v's tree edge).
    pub(crate) fn from_next(root: VertexId, next: Vec<Option<VertexId>>, members: Vec<bool>) -> Self {
        Self { root, next, members }
    }

    fn check_acyclic(&self) -> Result<(), StatsError> {
        let n = self.next.len();
        for v in 0..n {
            if !self.members[v] {
                continue;
            }
            let mut x = v;
            for _ in 0..=n {
                match self.next[x] {
                    Some(y) => x = y,
                    None => break,
                }
            }
            if x != self.root {
                return Err(StatsError::InvalidTree(format!("vertex {v} does not reach the root")));
            }
        }
        Ok(())
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn next(&self, v: VertexId) -> Option<VertexId> {
        self.next[v]
    }

    pub fn is_member(&self, v: VertexId) -> bool {
        self.members[v]
    }

    pub fn num_members(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_spanning(&self) -> bool {
        self.members.iter().all(|&m| m)
    }

    pub fn contains(&self, i: VertexId, j: VertexId) -> bool {
        self.next.get(i).copied().flatten() == Some(j)
    }

    /// Tree edges `(i, next(i))` in increasing order of `i`.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.next
            .iter()
            .enumerate()
            .filter_map(|(i, nx)| nx.map(|j| (i, j)))
    }

    pub fn indegree(&self, v: VertexId) -> usize {
        self.next.iter().filter(|&&nx| nx == Some(v)).count()
    }

    pub fn outdegree(&self, v: VertexId) -> usize {
        usize::from(self.next[v].is_some())
    }

    /// Directed-edge ids of the tree edges.
    pub fn directed_ids(&self, g: &WeightedGraph) -> Vec<DirectedEdgeId> {
        self.edges()
            .map(|(i, j)| g.directed_index(i, j).expect("tree edge in graph"))
            .collect()
    }

    /// Checks that the tree is a valid oriented tree on `g`.
    pub fn validate(&self, g: &WeightedGraph) -> Result<(), StatsError> {
        let edges: Vec<_> = self.edges().collect();
        let rebuilt = Self::from_edges(g, self.root, &edges)?;
        if rebuilt.members != self.members {
            return Err(StatsError::InvalidTree("membership does not match edges".into()));
        }
        Ok(())
    }
}

/// The tree-shifted current `ã_ij = a_ij - 1{ij ∈ T} + 1{ji ∈ T}` with its
/// divergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TildeCurrent {
    pub edge: Vec<i64>,
    pub divergence: Vec<i64>,
}

/// Occupation time of each vertex on `[0, horizon]`.
pub fn local_times(g: &WeightedGraph, path: &JumpPath) -> LocalTimes {
    let mut ell = vec![0.0; g.n()];
    let mut t = 0.0;
    let mut x = path.start;
    for jump in &path.events {
        ell[x] += jump.time - t;
        t = jump.time;
        x = jump.target;
    }
    ell[x] += path.horizon - t;
    LocalTimes(ell)
}

/// Oriented crossing counts `k_ij`.
pub fn crossings(g: &WeightedGraph, path: &JumpPath) -> CrossingCounts {
    let mut k = vec![0u64; g.num_directed()];
    let mut x = path.start;
    for jump in &path.events {
        let d = g
            .directed_index(x, jump.target)
            .expect("path jumps along graph edges");
        k[d] += 1;
        x = jump.target;
    }
    CrossingCounts(k)
}

/// `a(k)_ij = k_ij - k_ji`.
pub fn current_of(g: &WeightedGraph, k: &CrossingCounts) -> Current {
    Current(
        (0..g.num_directed())
            .map(|d| k.0[d] as i64 - k.0[g.reverse(d)] as i64)
            .collect(),
    )
}

/// Last-exit tree: for every visited vertex other than the final state, the
/// edge used on its last departure. Rooted at the final state.
pub fn last_exit_tree(g: &WeightedGraph, path: &JumpPath) -> OrientedTree {
    let n = g.n();
    let root = path.end();
    let mut next = vec![None; n];
    let mut members = vec![false; n];
    members[root] = true;
    // Scanning backwards, the first departure seen from a vertex is its last.
    for m in (0..path.events.len()).rev() {
        let from = if m == 0 { path.start } else { path.events[m - 1].target };
        if !members[from] {
            members[from] = true;
            next[from] = Some(path.events[m].target);
        }
    }
    OrientedTree::from_next(root, next, members)
}

/// `ã` and its divergence `ã_i = a_i - outdeg_T(i) + indeg_T(i)`.
pub fn tilde_current(
    g: &WeightedGraph,
    a: &Current,
    tree: &OrientedTree,
) -> Result<TildeCurrent, StatsError> {
    if !tree.is_spanning() {
        return Err(StatsError::TreeNotSpanning { covered: tree.num_members(), n: g.n() });
    }
    let mut edge = a.0.clone();
    for (i, j) in tree.edges() {
        let d = g
            .directed_index(i, j)
            .ok_or_else(|| StatsError::InvalidTree(format!("({i}, {j}) is not a graph edge")))?;
        edge[d] -= 1;
        edge[g.reverse(d)] += 1;
    }
    let shifted = Current(edge);
    let divergence = shifted.divergence(g);
    Ok(TildeCurrent { edge: shifted.0, divergence })
}

/// All three functionals of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub local_times: LocalTimes,
    pub counts: CrossingCounts,
    pub current: Current,
    pub tree: OrientedTree,
}

pub fn path_stats(g: &WeightedGraph, path: &JumpPath) -> PathStats {
    let counts = crossings(g, path);
    PathStats {
        local_times: local_times(g, path),
        current: current_of(g, &counts),
        counts,
        tree: last_exit_tree(g, path),
    }
}
