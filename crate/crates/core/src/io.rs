//! Label-based file schemas: graphs, paths, per-path statistics, density
//! outcomes, verification targets and cells, killing rates, Wilson samples.
//!
//! Directed edges are keyed `"u->v"` by vertex label. Vertex-indexed
//! vectors (`ell`, `local_times`) follow the order of the graph's `vertices`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityError, JointOutcome};
use crate::graph::{GraphError, VertexId, WeightedGraph};
use crate::simulate::{Jump, JumpPath};
use crate::statistics::{path_stats, CrossingCounts, Current, LocalTimes, OrientedTree, StatsError};
use crate::verify::LocalTimeCell;
use crate::wilson::{loop_cycling_numbers, WilsonOutput, CEMETERY_LABEL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("InvalidEdgeKey: `{0}` is not of the form u->v for a graph edge")]
    InvalidEdgeKey(String),
    #[error("MissingField: `{0}`")]
    MissingField(&'static str),
    #[error("InvalidValue: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
}

impl GraphFile {
    pub fn to_graph(&self) -> Result<WeightedGraph, GraphError> {
        let vertices: Vec<&str> = self.vertices.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str, f64)> = self.edges.iter().map(|e| (e.u.as_str(), e.v.as_str(), e.w)).collect();
        WeightedGraph::new(&vertices, &edges)
    }

    pub fn from_graph(g: &WeightedGraph) -> Self {
        Self {
            vertices: g.labels().to_vec(),
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeSpec { u: g.label(e.u).into(), v: g.label(e.v).into(), w: e.weight })
                .collect(),
        }
    }
}

pub fn edge_key(g: &WeightedGraph, i: VertexId, j: VertexId) -> String {
    format!("{}->{}", g.label(i), g.label(j))
}

pub fn parse_edge_key(g: &WeightedGraph, key: &str) -> Result<(VertexId, VertexId), IoError> {
    let bad = || IoError::InvalidEdgeKey(key.to_string());
    let (u, v) = key.split_once("->").ok_or_else(bad)?;
    let (i, j) = (g.vertex(u.trim())?, g.vertex(v.trim())?);
    g.directed_index(i, j).ok_or_else(bad)?;
    Ok((i, j))
}

/// Oriented tree as a root plus `[tail, head]` edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub root: String,
    pub edges: Vec<[String; 2]>,
}

impl TreeSpec {
    pub fn from_tree(g: &WeightedGraph, t: &OrientedTree) -> Self {
        Self {
            root: g.label(t.root()).into(),
            edges: t.edges().map(|(i, j)| [g.label(i).into(), g.label(j).into()]).collect(),
        }
    }

    pub fn to_tree(&self, g: &WeightedGraph) -> Result<OrientedTree, IoError> {
        let root = g.vertex(&self.root)?;
        let edges = self
            .edges
            .iter()
            .map(|[u, v]| Ok((g.vertex(u)?, g.vertex(v)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Ok(OrientedTree::from_edges(g, root, &edges)?)
    }
}

/// Current from values on listed orientations; unlisted edges carry zero.
pub fn current_from_map(g: &WeightedGraph, m: &BTreeMap<String, i64>) -> Result<Current, IoError> {
    let values = m
        .iter()
        .map(|(k, &v)| parse_edge_key(g, k).map(|(i, j)| (i, j, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Current::from_oriented(g, &values)?)
}

/// Nonzero entries of `a`, listed on their positive orientation.
pub fn current_to_map(g: &WeightedGraph, a: &Current) -> BTreeMap<String, i64> {
    g.directed_edges()
        .iter()
        .zip(&a.0)
        .filter(|(_, &v)| v > 0)
        .map(|(&(i, j), &v)| (edge_key(g, i, j), v))
        .collect()
}

/// Crossing counts from a sparse map; unlisted directed edges count zero.
pub fn counts_from_map(g: &WeightedGraph, m: &BTreeMap<String, u64>) -> Result<CrossingCounts, IoError> {
    let mut k = vec![0; g.num_directed()];
    for (key, &v) in m {
        let (i, j) = parse_edge_key(g, key)?;
        k[g.directed_index(i, j).expect("checked by parse_edge_key")] = v;
    }
    Ok(CrossingCounts(k))
}

pub fn counts_to_map(g: &WeightedGraph, k: &CrossingCounts) -> BTreeMap<String, u64> {
    g.directed_edges()
        .iter()
        .zip(&k.0)
        .filter(|(_, &v)| v > 0)
        .map(|(&(i, j), &v)| (edge_key(g, i, j), v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub t: f64,
    pub to: String,
}

/// One line of a paths file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub replica: u64,
    pub start: String,
    pub horizon: f64,
    pub jumps: Vec<JumpSpec>,
}

impl PathRecord {
    pub fn from_path(g: &WeightedGraph, replica: u64, p: &JumpPath) -> Self {
        Self {
            replica,
            start: g.label(p.start).into(),
            horizon: p.horizon,
            jumps: p.events.iter().map(|e| JumpSpec { t: e.time, to: g.label(e.target).into() }).collect(),
        }
    }

    pub fn to_path(&self, g: &WeightedGraph) -> Result<JumpPath, IoError> {
        let events = self
            .jumps
            .iter()
            .map(|j| Ok(Jump { time: j.t, target: g.vertex(&j.to)? }))
            .collect::<Result<Vec<_>, GraphError>>()?;
        let p = JumpPath { start: g.vertex(&self.start)?, events, horizon: self.horizon };
        p.validate(g).map_err(|e| IoError::InvalidValue(format!("replica {}: {e}", self.replica)))?;
        Ok(p)
    }
}

/// One line of a statistics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub replica: u64,
    pub end: String,
    pub ell: Vec<f64>,
    pub k: BTreeMap<String, u64>,
    pub a: BTreeMap<String, i64>,
    pub tree: TreeSpec,
}

impl StatsRecord {
    pub fn from_path(g: &WeightedGraph, replica: u64, p: &JumpPath) -> Self {
        let s = path_stats(g, p);
        Self {
            replica,
            end: g.label(p.end()).into(),
            ell: s.local_times.0,
            k: counts_to_map(g, &s.counts),
            a: current_to_map(g, &s.current),
            tree: TreeSpec::from_tree(g, &s.tree),
        }
    }
}

/// A point of the joint law, given by `current` or by `counts` (not both).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeFile {
    pub start: String,
    pub end: String,
    pub ell: BTreeMap<String, f64>,
    pub tree: TreeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<BTreeMap<String, i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
}

impl OutcomeFile {
    pub fn to_outcome(&self, g: &WeightedGraph) -> Result<JointOutcome, IoError> {
        let (i0, i1) = (g.vertex(&self.start)?, g.vertex(&self.end)?);
        let mut ell = vec![f64::NAN; g.n()];
        for (label, &l) in &self.ell {
            ell[g.vertex(label)?] = l;
        }
        let tree = self.tree.to_tree(g)?;
        let ell = LocalTimes(ell);
        Ok(match (&self.current, &self.counts) {
            (Some(a), None) => JointOutcome::with_current(g, i0, i1, ell, tree, current_from_map(g, a)?)?,
            (None, Some(k)) => JointOutcome::with_counts(g, i0, i1, ell, tree, counts_from_map(g, k)?)?,
            _ => return Err(IoError::InvalidValue("outcome needs exactly one of `current` and `counts`".into())),
        })
    }
}

/// Verification target. Which fields are required depends on the check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub start: String,
    #[serde(default)]
    pub end: Option<String>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub current: Option<BTreeMap<String, i64>>,
    #[serde(default)]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(default)]
    pub tree: Option<TreeSpec>,
}

impl TargetFile {
    pub fn start(&self, g: &WeightedGraph) -> Result<VertexId, IoError> {
        Ok(g.vertex(&self.start)?)
    }

    pub fn end(&self, g: &WeightedGraph) -> Result<VertexId, IoError> {
        Ok(g.vertex(self.end.as_deref().ok_or(IoError::MissingField("end"))?)?)
    }

    pub fn sigma(&self) -> Result<f64, IoError> {
        self.sigma.ok_or(IoError::MissingField("sigma"))
    }

    pub fn u(&self) -> Result<f64, IoError> {
        self.u.ok_or(IoError::MissingField("u"))
    }

    pub fn tree(&self, g: &WeightedGraph) -> Result<OrientedTree, IoError> {
        self.tree.as_ref().ok_or(IoError::MissingField("tree"))?.to_tree(g)
    }

    pub fn current(&self, g: &WeightedGraph) -> Result<Current, IoError> {
        current_from_map(g, self.current.as_ref().ok_or(IoError::MissingField("current"))?)
    }

    pub fn counts(&self, g: &WeightedGraph) -> Result<CrossingCounts, IoError> {
        counts_from_map(g, self.counts.as_ref().ok_or(IoError::MissingField("counts"))?)
    }
}

/// Local-time box: `[lo, hi)` for every vertex except `dependent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub dependent: String,
    pub bounds: BTreeMap<String, [f64; 2]>,
}

impl CellSpec {
    pub fn to_cell(&self, g: &WeightedGraph) -> Result<LocalTimeCell, IoError> {
        let bounds = self
            .bounds
            .iter()
            .map(|(label, &[lo, hi])| Ok((g.vertex(label)?, lo, hi)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        LocalTimeCell::new(g, g.vertex(&self.dependent)?, &bounds).map_err(|e| IoError::InvalidValue(e.to_string()))
    }
}

/// A single cell or a list of disjoint histogram bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellFile {
    One(CellSpec),
    Many(Vec<CellSpec>),
}

impl CellFile {
    pub fn cells(&self, g: &WeightedGraph) -> Result<Vec<LocalTimeCell>, IoError> {
        match self {
            CellFile::One(c) => Ok(vec![c.to_cell(g)?]),
            CellFile::Many(cs) => cs.iter().map(|c| c.to_cell(g)).collect(),
        }
    }
}

/// Killing rates by vertex label; unlisted vertices get zero.
pub fn kappa_vector(g: &WeightedGraph, m: &BTreeMap<String, f64>) -> Result<Vec<f64>, IoError> {
    let mut kappa = vec![0.0; g.n()];
    for (label, &k) in m {
        kappa[g.vertex(label)?] = k;
    }
    Ok(kappa)
}

/// One line of a Wilson samples file. Parents and loops use vertex labels,
/// with the cemetery written as `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonRecord {
    pub replica: u64,
    pub parent: BTreeMap<String, String>,
    pub loops: Vec<Vec<String>>,
    pub cycling: BTreeMap<String, i64>,
    pub local_times: Vec<f64>,
}

impl WilsonRecord {
    pub fn from_output(g: &WeightedGraph, replica: u64, out: &WilsonOutput) -> Self {
        let name = |v: VertexId| if v == g.n() { CEMETERY_LABEL.to_string() } else { g.label(v).to_string() };
        Self {
            replica,
            parent: (0..g.n()).map(|v| (name(v), name(out.parent[v]))).collect(),
            loops: out.loops.iter().map(|l| l.iter().map(|&v| name(v)).collect()).collect(),
            cycling: current_to_map(g, &loop_cycling_numbers(g, out)),
            local_times: out.local_times.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(&["a", "b", "c"], &[("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 0.5)]).unwrap()
    }

    #[test]
    fn edge_keys() {
        let g = triangle();
        assert_eq!(parse_edge_key(&g, "c->a").unwrap(), (2, 0));
        assert_eq!(edge_key(&g, 1, 2), "b->c");
        assert!(matches!(parse_edge_key(&g, "a-b"), Err(IoError::InvalidEdgeKey(_))));
        assert!(matches!(parse_edge_key(&g, "a->z"), Err(IoError::Graph(GraphError::UnknownVertex(_)))));
    }

    #[test]
    fn current_map_round_trip() {
        let g = triangle();
        let a = current_from_map(&g, &BTreeMap::from([("b->a".into(), 2), ("a->c".into(), -1)])).unwrap();
        assert_eq!(a.get(&g, 0, 1), Some(-2));
        assert_eq!(a.get(&g, 2, 0), Some(1));
        assert_eq!(current_from_map(&g, &current_to_map(&g, &a)).unwrap(), a);
    }

    #[test]
    fn tree_round_trip() {
        let g = triangle();
        let t = OrientedTree::from_edges(&g, 2, &[(0, 1), (1, 2)]).unwrap();
        let spec = TreeSpec::from_tree(&g, &t);
        assert_eq!(spec.root, "c");
        assert_eq!(spec.to_tree(&g).unwrap(), t);
    }

    #[test]
    fn outcome_needs_one_crossing_field() {
        let g = triangle();
        let mut o = OutcomeFile {
            start: "a".into(),
            end: "b".into(),
            ell: BTreeMap::from([("a".into(), 1.0), ("b".into(), 0.5), ("c".into(), 0.2)]),
            tree: TreeSpec { root: "b".into(), edges: vec![["a".into(), "b".into()], ["c".into(), "b".into()]] },
            current: None,
            counts: None,
        };
        assert!(matches!(o.to_outcome(&g), Err(IoError::InvalidValue(_))));
        o.counts = Some(BTreeMap::from([("a->b".into(), 1), ("b->c".into(), 1), ("c->b".into(), 1)]));
        let out = o.to_outcome(&g).unwrap();
        assert_eq!(out.current(&g).get(&g, 0, 1), Some(1));
    }
}
