//! Weighted finite graphs with symmetric conductances.
//!
//! Vertices carry string labels externally and dense indices `0..n`
//! internally. Every undirected edge `{u, v}` yields two directed edges
//! `(u, v)` and `(v, u)`, enumerated in lexicographic order of dense indices.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Dense vertex index.
pub type VertexId = usize;

/// Dense directed-edge index into [`WeightedGraph::directed_edges`].
pub type DirectedEdgeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("DisconnectedGraph: vertex `{0}` is not reachable from `{1}`")]
    DisconnectedGraph(String, String),
    #[error("NonPositiveWeight: edge {{{0}, {1}}} has weight {2}")]
    NonPositiveWeight(String, String, f64),
    #[error("DuplicateEdge: edge {{{0}, {1}}} listed more than once")]
    DuplicateEdge(String, String),
    #[error("SelfLoop: edge at vertex `{0}`")]
    SelfLoop(String),
    #[error("UnknownVertex: `{0}`")]
    UnknownVertex(String),
    #[error("DuplicateVertex: `{0}`")]
    DuplicateVertex(String),
    #[error("TooFewVertices: a graph needs at least two vertices and one edge, got {0}")]
    TooFewVertices(usize),
}

/// One undirected edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub vertex: VertexId,
    pub weight: f64,
    /// Directed edge from the owning vertex to `vertex`.
    pub out_edge: DirectedEdgeId,
}

/// Connected, simple, undirected graph with strictly positive conductances.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    edges: Vec<Edge>,
    directed: Vec<(VertexId, VertexId)>,
    directed_weight: Vec<f64>,
    reverse: Vec<DirectedEdgeId>,
    undirected_of: Vec<usize>,
    adjacency: Vec<Vec<Neighbor>>,
    rates: Vec<f64>,
}

impl WeightedGraph {
    /// Builds and validates a graph from labels and `(u, v, weight)` triples.
    pub fn new<S: AsRef<str>>(
        vertices: &[S],
        edges: &[(S, S, f64)],
    ) -> Result<Self, GraphError> {
        let labels: Vec<String> = vertices.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(label.clone()));
            }
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(s.to_owned()))
        };
        let mut dense = Vec::with_capacity(edges.len());
        for (u, v, w) in edges {
            dense.push((lookup(u.as_ref())?, lookup(v.as_ref())?, *w));
        }
        Self::from_dense(labels, &dense)
    }

    /// Builds a graph on vertices labelled `"0".."n-1"` from dense triples.
    pub fn from_indices(n: usize, edges: &[(VertexId, VertexId, f64)]) -> Result<Self, GraphError> {
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::from_dense(labels, edges)
    }

    fn from_dense(
        labels: Vec<String>,
        edge_list: &[(VertexId, VertexId, f64)],
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        if n < 2 || edge_list.is_empty() {
            return Err(GraphError::TooFewVertices(n));
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() != n {
            let mut seen = std::collections::HashSet::new();
            let dup = labels.iter().find(|l| !seen.insert(*l)).cloned().unwrap_or_default();
            return Err(GraphError::DuplicateVertex(dup));
        }

        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b, w) in edge_list {
            for &x in &[a, b] {
                if x >= n {
                    return Err(GraphError::UnknownVertex(x.to_string()));
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(labels[a].clone()));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight(
                    labels[a].clone(),
                    labels[b].clone(),
                    w,
                ));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge { u, v, weight: w });
        }
        edges.sort_by_key(|e| (e.u, e.v));
        for pair in edges.windows(2) {
            if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
                return Err(GraphError::DuplicateEdge(
                    labels[pair[0].u].clone(),
                    labels[pair[0].v].clone(),
                ));
            }
        }

        // Directed edges in lexicographic (tail, head) order.
        let mut directed: Vec<(VertexId, VertexId, f64, usize)> = edges
            .iter()
            .enumerate()
            .flat_map(|(k, e)| [(e.u, e.v, e.weight, k), (e.v, e.u, e.weight, k)])
            .collect();
        directed.sort_by_key(|&(i, j, _, _)| (i, j));
        let position: HashMap<(VertexId, VertexId), DirectedEdgeId> = directed
            .iter()
            .enumerate()
            .map(|(d, &(i, j, _, _))| ((i, j), d))
            .collect();
        let reverse = directed.iter().map(|&(i, j, _, _)| position[&(j, i)]).collect();

        let mut adjacency = vec![Vec::new(); n];
        for (d, &(i, j, w, _)) in directed.iter().enumerate() {
            adjacency[i].push(Neighbor { vertex: j, weight: w, out_edge: d });
        }
        let rates = adjacency
            .iter()
            .map(|nb| nb.iter().map(|x| x.weight).sum())
            .collect();

        let graph = Self {
            labels,
            index,
            edges,
            directed_weight: directed.iter().map(|d| d.2).collect(),
            undirected_of: directed.iter().map(|d| d.3).collect(),
            directed: directed.iter().map(|d| (d.0, d.1)).collect(),
            reverse,
            adjacency,
            rates,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for nb in &self.adjacency[x] {
                if !seen[nb.vertex] {
                    seen[nb.vertex] = true;
                    stack.push(nb.vertex);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(missing) => Err(GraphError::DisconnectedGraph(
                self.labels[missing].clone(),
                self.labels[0].clone(),
            )),
            None => Ok(()),
        }
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: VertexId) -> &str {
        &self.labels[i]
    }

    /// Resolves a label to its dense index.
    pub fn vertex(&self, label: &str) -> Result<VertexId, GraphError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(label.to_owned()))
    }

    /// Undirected edges sorted by `(u, v)` with `u < v`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Directed edges in lexicographic order of dense indices.
    pub fn directed_edges(&self) -> &[(VertexId, VertexId)] {
        &self.directed
    }

    pub fn num_directed(&self) -> usize {
        self.directed.len()
    }

    pub fn directed_weight(&self, d: DirectedEdgeId) -> f64 {
        self.directed_weight[d]
    }

    /// The directed edge pointing the opposite way.
    pub fn reverse(&self, d: DirectedEdgeId) -> DirectedEdgeId {
        self.reverse[d]
    }

    /// Index into [`edges`](Self::edges) of the undirected edge under `d`.
    pub fn undirected_of(&self, d: DirectedEdgeId) -> usize {
        self.undirected_of[d]
    }

    pub fn directed_index(&self, i: VertexId, j: VertexId) -> Option<DirectedEdgeId> {
        self.adjacency
            .get(i)?
            .iter()
            .find(|nb| nb.vertex == j)
            .map(|nb| nb.out_edge)
    }

    /// Conductance `W_ij`, if `{i, j}` is an edge.
    pub fn weight(&self, i: VertexId, j: VertexId) -> Option<f64> {
        self.directed_index(i, j).map(|d| self.directed_weight[d])
    }

    pub fn neighbors(&self, i: VertexId) -> &[Neighbor] {
        &self.adjacency[i]
    }

    /// Total jump rate `W_i = sum_{j ~ i} W_ij`.
    pub fn vertex_rate(&self, i: VertexId) -> Result<f64, GraphError> {
        self.rates
            .get(i)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(i.to_string()))
    }

    /// All vertex rates, index-addressed.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n()
    }

    /// `|E| - |V| + 1`, the dimension of the cycle space.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + 1 - self.n()
    }
}

impl fmt::Display for WeightedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph(|V|={}, |E|={})", self.n(), self.edges.len())
    }
}
