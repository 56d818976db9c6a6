//! Wilson's algorithm for the walk killed at rate `κ_i`, with chronological
//! loop erasure.
//!
//! The cemetery is modelled as one extra vertex `Δ` joined to every `i` with
//! `κ_i > 0` by an edge of conductance `κ_i`; a stage ends when its walk
//! reaches `Δ` or a vertex already in the forest.

use std::collections::HashMap;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, VertexId, WeightedGraph};
use crate::simulate::{pick_neighbor, RngStream};
use crate::statistics::Current;
use crate::trees_cycles::{enumerate_spanning_trees_capped, tree_weight, weighted_tree_sum, TreeError};
use crate::verify::{chi_square_goodness_of_fit, chi_square_homogeneity, ChiSquareReport};

/// Label of the cemetery vertex in the extended graph.
pub const CEMETERY_LABEL: &str = "Δ";
/// Largest extended graph (including the cemetery) for the tree-law check.
pub const TREE_LAW_MAX_VERTICES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WilsonError {
    #[error("InvalidKilling: {0}")]
    InvalidKilling(String),
    #[error("InvalidOrder: {0}")]
    InvalidOrder(String),
    #[error("GraphTooLarge: {n} vertices (with cemetery) exceeds the cap of {cap}")]
    GraphTooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// A weighted graph with killing rates.
#[derive(Debug, Clone)]
pub struct KilledGraph {
    graph: WeightedGraph,
    kappa: Vec<f64>,
    extended: WeightedGraph,
}

impl KilledGraph {
    pub fn new(graph: WeightedGraph, kappa: Vec<f64>) -> Result<Self, WilsonError> {
        if kappa.len() != graph.n() {
            return Err(WilsonError::InvalidKilling(format!(
                "{} killing rates for {} vertices",
                kappa.len(),
                graph.n()
            )));
        }
        if let Some(k) = kappa.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(WilsonError::InvalidKilling(format!("killing rate {k} is not a nonnegative real")));
        }
        if kappa.iter().all(|&k| k == 0.0) {
            return Err(WilsonError::InvalidKilling("at least one killing rate must be positive".into()));
        }
        let mut labels: Vec<String> = graph.labels().to_vec();
        labels.push(CEMETERY_LABEL.to_owned());
        let mut edges: Vec<(String, String, f64)> = graph
            .edges()
            .iter()
            .map(|e| (labels[e.u].clone(), labels[e.v].clone(), e.weight))
            .collect();
        for (i, &k) in kappa.iter().enumerate() {
            if k > 0.0 {
                edges.push((labels[i].clone(), CEMETERY_LABEL.to_owned(), k));
            }
        }
        let extended = WeightedGraph::new(&labels, &edges)?;
        Ok(Self { graph, kappa, extended })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// The graph with the cemetery vertex appended at index `n`.
    pub fn extended(&self) -> &WeightedGraph {
        &self.extended
    }

    pub fn cemetery(&self) -> VertexId {
        self.graph.n()
    }
}

/// One loop-erased branch of Wilson's algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonStage {
    pub start: VertexId,
    /// Loop-erased path, ending at the cemetery or at the forest.
    pub branch: Vec<VertexId>,
    /// Occupation time of each vertex during this stage.
    pub local_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonOutput {
    /// `parent[v]` is the next vertex of `v` in the forest; the value
    /// `n` (the cemetery index) marks a root edge.
    pub parent: Vec<VertexId>,
    /// Erased loops, each a closed walk `v_0 -> v_1 -> ... -> v_0` stored
    /// without the repeated endpoint.
    pub loops: Vec<Vec<VertexId>>,
    pub stages: Vec<WilsonStage>,
    pub local_times: Vec<f64>,
}

impl WilsonOutput {
    /// True when every vertex reaches the cemetery by following `parent`.
    pub fn is_rooted_forest(&self) -> bool {
        let n = self.parent.len();
        (0..n).all(|v| {
            let mut x = v;
            for _ in 0..=n {
                if x == n {
                    return true;
                }
                x = self.parent[x];
            }
            false
        })
    }
}

fn check_order(n: usize, order: &[VertexId]) -> Result<(), WilsonError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(WilsonError::InvalidOrder(format!("order has {} entries for {n} vertices", order.len())));
    }
    for &v in order {
        if v >= n || seen[v] {
            return Err(WilsonError::InvalidOrder(format!("vertex {v} missing, repeated or out of range")));
        }
        seen[v] = true;
    }
    Ok(())
}

/// Runs Wilson's algorithm, starting each branch from the first vertex of
/// `order` not yet in the forest.
pub fn wilson_sample(kg: &KilledGraph, order: &[VertexId], stream: RngStream) -> Result<WilsonOutput, WilsonError> {
    let n = kg.graph.n();
    check_order(n, order)?;
    let ext = &kg.extended;
    let cemetery = kg.cemetery();
    let rates = ext.rates();
    let mut rng = stream.rng();

    let mut in_forest = vec![false; n + 1];
    in_forest[cemetery] = true;
    let mut parent = vec![cemetery; n];
    let mut on_path: Vec<Option<usize>> = vec![None; n + 1];
    let mut loops = Vec::new();
    let mut stages = Vec::new();
    let mut total = vec![0.0; n];

    for &start in order {
        if in_forest[start] {
            continue;
        }
        let mut stage_lt = vec![0.0; n];
        let mut path = vec![start];
        on_path[start] = Some(0);
        let mut x = start;
        loop {
            let u: f64 = rng.sample(Open01);
            stage_lt[x] += -u.ln() / rates[x];
            let y = pick_neighbor(ext, x, &mut rng);
            if in_forest[y] {
                path.push(y);
                break;
            }
            if let Some(p) = on_path[y] {
                loops.push(path[p..].to_vec());
                for &v in &path[p + 1..] {
                    on_path[v] = None;
                }
                path.truncate(p + 1);
            } else {
                on_path[y] = Some(path.len());
                path.push(y);
            }
            x = y;
        }
        for w in path.windows(2) {
            parent[w[0]] = w[1];
            in_forest[w[0]] = true;
            on_path[w[0]] = None;
        }
        for (t, s) in total.iter_mut().zip(&stage_lt) {
            *t += s;
        }
        stages.push(WilsonStage { start, branch: path, local_times: stage_lt });
    }
    Ok(WilsonOutput { parent, loops, stages, local_times: total })
}

/// Net signed crossings of all erased loops.
pub fn loop_cycling_numbers(g: &WeightedGraph, out: &WilsonOutput) -> Current {
    let mut a = Current::zero(g);
    for lp in &out.loops {
        for t in 0..lp.len() {
            let (i, j) = (lp[t], lp[(t + 1) % lp.len()]);
            let d = g.directed_index(i, j).expect("loops follow graph edges");
            a.0[d] += 1;
            a.0[g.reverse(d)] -= 1;
        }
    }
    a
}

/// `n` Wilson samples, replica `r` on stream `(seed, r)`.
pub fn wilson_batch(kg: &KilledGraph, order: &[VertexId], n: usize, seed: u64) -> Result<Vec<WilsonOutput>, WilsonError> {
    (0..n)
        .into_par_iter()
        .map(|r| wilson_sample(kg, order, RngStream::new(seed, r as u64)))
        .collect()
}

/// Rooted forests (as parent vectors) with their exact probabilities
/// `prod W * prod κ / det(L + K)`.
pub fn forest_law(kg: &KilledGraph) -> Result<Vec<(Vec<VertexId>, f64)>, WilsonError> {
    let ext = &kg.extended;
    if ext.n() > TREE_LAW_MAX_VERTICES {
        return Err(WilsonError::GraphTooLarge { n: ext.n(), cap: TREE_LAW_MAX_VERTICES });
    }
    let c = kg.cemetery();
    let z = weighted_tree_sum(ext, c)?;
    let trees = enumerate_spanning_trees_capped(ext, c, TREE_LAW_MAX_VERTICES)?;
    Ok(trees
        .iter()
        .map(|t| {
            let parent = (0..c).map(|v| t.next(v).expect("non-root")).collect();
            (parent, tree_weight(ext, t) / z)
        })
        .collect())
}

fn forest_counts(
    law: &[(Vec<VertexId>, f64)],
    samples: &[WilsonOutput],
) -> Vec<u64> {
    let index: HashMap<&[VertexId], usize> = law.iter().enumerate().map(|(i, (p, _))| (p.as_slice(), i)).collect();
    let mut counts = vec![0u64; law.len()];
    for s in samples {
        counts[index[s.parent.as_slice()]] += 1;
    }
    counts
}

/// Chi-square test of sampled Wilson forests against the weighted
/// matrix-tree law.
pub fn tree_law_check(
    kg: &KilledGraph,
    order: &[VertexId],
    n: usize,
    seed: u64,
    p_threshold: f64,
) -> Result<ChiSquareReport, WilsonError> {
    let law = forest_law(kg)?;
    let samples = wilson_batch(kg, order, n, seed)?;
    let probs: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
    Ok(chi_square_goodness_of_fit(&forest_counts(&law, &samples), &probs, p_threshold))
}

/// Two-sample chi-square test that the forest law does not depend on the
/// vertex order. The second sample uses seed `seed + 1`.
pub fn order_independence_check(
    kg: &KilledGraph,
    order_a: &[VertexId],
    order_b: &[VertexId],
    n: usize,
    seed: u64,
    p_threshold: f64,
) -> Result<ChiSquareReport, WilsonError> {
    let law = forest_law(kg)?;
    let a = forest_counts(&law, &wilson_batch(kg, order_a, n, seed)?);
    let b = forest_counts(&law, &wilson_batch(kg, order_b, n, seed.wrapping_add(1))?);
    Ok(chi_square_homogeneity(&a, &b, p_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_killed() -> KilledGraph {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 1.5), (0, 2, 0.7)]).unwrap();
        KilledGraph::new(g, vec![0.3, 0.0, 0.2]).unwrap()
    }

    #[test]
    fn killing_validation() {
        let g = WeightedGraph::from_indices(2, &[(0, 1, 1.0)]).unwrap();
        assert!(KilledGraph::new(g.clone(), vec![0.0, 0.0]).is_err());
        assert!(KilledGraph::new(g.clone(), vec![-1.0, 1.0]).is_err());
        assert!(KilledGraph::new(g.clone(), vec![1.0]).is_err());
        let kg = KilledGraph::new(g, vec![0.0, 1.0]).unwrap();
        assert_eq!(kg.extended().n(), 3);
        assert_eq!(kg.extended().edges().len(), 2);
    }

    #[test]
    fn order_validation() {
        let kg = triangle_killed();
        assert!(wilson_sample(&kg, &[0, 1], RngStream::new(0, 0)).is_err());
        assert!(wilson_sample(&kg, &[0, 1, 1], RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn structural_invariants() {
        let kg = triangle_killed();
        for r in 0..500 {
            let out = wilson_sample(&kg, &[2, 0, 1], RngStream::new(5, r)).unwrap();
            assert!(out.is_rooted_forest());
            let a = loop_cycling_numbers(kg.graph(), &out);
            assert!(a.divergence(kg.graph()).iter().all(|&d| d == 0));
            let mut sum = [0.0; 3];
            for s in &out.stages {
                for (x, y) in sum.iter_mut().zip(&s.local_times) {
                    *x += y;
                }
                assert_eq!(s.branch[0], s.start);
                let end = *s.branch.last().unwrap();
                assert!(end == kg.cemetery() || out.parent[end] != end);
            }
            for (x, y) in sum.iter().zip(&out.local_times) {
                assert!((x - y).abs() <= 1e-12 * y.max(1.0));
            }
            for lp in &out.loops {
                assert!(lp.len() >= 2);
            }
        }
    }

    #[test]
    fn heavy_killing_gives_no_loops() {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let kg = KilledGraph::new(g, vec![1e6; 3]).unwrap();
        let samples = wilson_batch(&kg, &[0, 1, 2], 10_000, 1).unwrap();
        let with_loops = samples.iter().filter(|s| !s.loops.is_empty()).count();
        assert!(with_loops <= 100);
        let all_isolated = samples.iter().filter(|s| s.parent.iter().all(|&p| p == 3)).count();
        assert!(all_isolated >= 9_900);
    }

    #[test]
    fn forest_law_sums_to_one() {
        let law = forest_law(&triangle_killed()).unwrap();
        let total: f64 = law.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_vertex_law_matches_absorbing_chain() {
        // From 0: die first w.p. p0, else step to 1, which dies w.p. q1 or
        // returns (loop erased, restart). P(0 -> Δ is the first branch) = p0 / (p0 + (1-p0) q1).
        let (w, k0, k1) = (1.3, 0.4, 0.9);
        let g = WeightedGraph::from_indices(2, &[(0, 1, w)]).unwrap();
        let kg = KilledGraph::new(g, vec![k0, k1]).unwrap();
        let p0 = k0 / (w + k0);
        let q1 = k1 / (w + k1);
        let first_dead = p0 / (p0 + (1.0 - p0) * q1);
        let expect: HashMap<Vec<usize>, f64> = [
            (vec![2, 0], first_dead * (1.0 - q1)),
            (vec![2, 2], first_dead * q1),
            (vec![1, 2], 1.0 - first_dead),
        ]
        .into_iter()
        .collect();
        let law = forest_law(&kg).unwrap();
        assert_eq!(law.len(), 3);
        for (parent, p) in law {
            assert!((p - expect[&parent]).abs() < 1e-14, "{parent:?}");
        }
    }
}
