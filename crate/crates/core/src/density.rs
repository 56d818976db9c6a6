//! Closed-form joint densities of local times, last-exit tree and crossing
//! data, evaluated in log scale.
//!
//! Densities under a fixed horizon are taken with respect to Lebesgue measure
//! on the `|V| - 1` free local-time coordinates (any one coordinate is
//! implied by `sum ℓ_i = σ`); under inverse-local-time stopping the coordinate
//! of the stopping site is the one that is fixed.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedEdgeId, VertexId, WeightedGraph};
use crate::special_fn::{ln_factorial, log_bessel_i, BesselError};
use crate::statistics::{
    current_of, tilde_current, CrossingCounts, Current, LocalTimes, OrientedTree, StatsError,
    TildeCurrent,
};

/// Default per-edge truncation for [`sum_prop1_over_k`].
pub const DEFAULT_SERIES_TRUNCATION: u64 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("InvalidOutcome: {0}")]
    InvalidOutcome(String),
    #[error("NotATree: graph has {edges} edges on {vertices} vertices")]
    NotATree { vertices: usize, edges: usize },
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

impl From<StatsError> for DensityError {
    fn from(e: StatsError) -> Self {
        DensityError::InvalidOutcome(e.to_string())
    }
}

/// Natural log of a density. `-inf` is the exact-zero sentinel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogDensity(f64);

impl LogDensity {
    pub const ZERO: LogDensity = LogDensity(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Self {
        debug_assert!(!value.is_nan() && value != f64::INFINITY);
        LogDensity(value)
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn density(self) -> f64 {
        self.0.exp()
    }
}

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> LogDensity {
        if self.scaled == 0.0 {
            LogDensity::ZERO
        } else {
            LogDensity(self.max + self.scaled.ln())
        }
    }
}

/// Crossing data attached to a [`JointOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CrossingData {
    Current(Current),
    Counts(CrossingCounts),
}

/// A point of the joint law: endpoints, strictly positive local times, a
/// spanning tree rooted at the endpoint, and crossings whose divergence is
/// `δ_{i0} - δ_{i1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcome {
    pub i0: VertexId,
    pub i1: VertexId,
    pub ell: LocalTimes,
    pub tree: OrientedTree,
    pub crossings: CrossingData,
}

impl JointOutcome {
    pub fn with_current(
        g: &WeightedGraph,
        i0: VertexId,
        i1: VertexId,
        ell: LocalTimes,
        tree: OrientedTree,
        current: Current,
    ) -> Result<Self, DensityError> {
        let o = Self { i0, i1, ell, tree, crossings: CrossingData::Current(current) };
        o.validate(g)?;
        Ok(o)
    }

    pub fn with_counts(
        g: &WeightedGraph,
        i0: VertexId,
        i1: VertexId,
        ell: LocalTimes,
        tree: OrientedTree,
        counts: CrossingCounts,
    ) -> Result<Self, DensityError> {
        let o = Self { i0, i1, ell, tree, crossings: CrossingData::Counts(counts) };
        o.validate(g)?;
        Ok(o)
    }

    pub fn validate(&self, g: &WeightedGraph) -> Result<(), DensityError> {
        let n = g.n();
        let invalid = |m: String| Err(DensityError::InvalidOutcome(m));
        if self.i0 >= n || self.i1 >= n {
            return invalid(format!("endpoints ({}, {}) out of range", self.i0, self.i1));
        }
        if self.ell.0.len() != n {
            return invalid(format!("{} local times for {n} vertices", self.ell.0.len()));
        }
        if let Some(i) = self.ell.0.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid(format!("local time at {i} must be positive, got {}", self.ell.0[i]));
        }
        self.tree.validate(g)?;
        if !self.tree.is_spanning() {
            return invalid("last-exit tree does not span the graph".into());
        }
        if self.tree.root() != self.i1 {
            return invalid(format!("tree root {} differs from i1 = {}", self.tree.root(), self.i1));
        }
        let a = match &self.crossings {
            CrossingData::Current(a) => {
                if !a.is_antisymmetric(g) {
                    return invalid("current is not antisymmetric".into());
                }
                a.clone()
            }
            CrossingData::Counts(k) => {
                if k.0.len() != g.num_directed() {
                    return invalid(format!("{} counts for {} directed edges", k.0.len(), g.num_directed()));
                }
                current_of(g, k)
            }
        };
        if !a.has_boundary(g, self.i0, self.i1) {
            return invalid(format!(
                "divergence {:?} is not δ_{} - δ_{}",
                a.divergence(g),
                self.i0,
                self.i1
            ));
        }
        Ok(())
    }

    /// The current `a`, derived from counts when necessary.
    pub fn current(&self, g: &WeightedGraph) -> Current {
        match &self.crossings {
            CrossingData::Current(a) => a.clone(),
            CrossingData::Counts(k) => current_of(g, k),
        }
    }
}

fn exposure(g: &WeightedGraph, ell: &[f64]) -> f64 {
    g.rates().iter().zip(ell).map(|(w, l)| w * l).sum()
}

/// `sum_i (ã_i / 2) ln ℓ_i`.
pub fn half_power_log_by_vertex(tilde: &TildeCurrent, ell: &[f64]) -> f64 {
    tilde
        .divergence
        .iter()
        .zip(ell)
        .map(|(&d, l)| 0.5 * d as f64 * l.ln())
        .sum()
}

/// `sum_{ij ∈ E+} (ã_ij / 2) ln ℓ_i + (ã_ji / 2) ln ℓ_j`, one orientation per edge.
pub fn half_power_log_by_edge(g: &WeightedGraph, tilde: &TildeCurrent, ell: &[f64]) -> f64 {
    g.edges()
        .iter()
        .map(|e| {
            let d = g.directed_index(e.u, e.v).expect("edge");
            let r = g.reverse(d);
            0.5 * tilde.edge[d] as f64 * ell[e.u].ln() + 0.5 * tilde.edge[r] as f64 * ell[e.v].ln()
        })
        .sum()
}

/// Log of the joint density of `(a(k), ℓ, T)`:
/// `exp(-sum W_i ℓ_i) prod_e I_{ã_e}(2 W_e sqrt(ℓ_i ℓ_j)) prod_{T} W_ij prod_i ℓ_i^{ã_i/2}`.
pub fn theorem1_log_density(g: &WeightedGraph, o: &JointOutcome) -> Result<LogDensity, DensityError> {
    o.validate(g)?;
    let a = o.current(g);
    theorem1_unchecked(g, &o.ell.0, &o.tree, &a)
}

pub(crate) fn theorem1_unchecked(
    g: &WeightedGraph,
    ell: &[f64],
    tree: &OrientedTree,
    a: &Current,
) -> Result<LogDensity, DensityError> {
    let tilde = tilde_current(g, a, tree)?;
    let mut log = -exposure(g, ell);
    for e in g.edges() {
        let d = g.directed_index(e.u, e.v).expect("edge");
        let z = 2.0 * e.weight * (ell[e.u] * ell[e.v]).sqrt();
        log += log_bessel_i(tilde.edge[d], z)?;
    }
    for (i, j) in tree.edges() {
        log += g.weight(i, j).expect("tree edge").ln();
    }
    log += half_power_log_by_vertex(&tilde, ell);
    if log.is_nan() || log == f64::NEG_INFINITY {
        return Ok(LogDensity::ZERO);
    }
    Ok(LogDensity(log))
}

/// Precomputed pieces of the crossing-count density for fixed `ℓ` and tree.
struct Prop1Evaluator {
    base: f64,
    ln_rate: Vec<f64>,
    tree_ids: Vec<DirectedEdgeId>,
    tree_ln_ell: Vec<f64>,
}

impl Prop1Evaluator {
    fn new(g: &WeightedGraph, ell: &[f64], tree: &OrientedTree) -> Self {
        let ln_rate = g
            .directed_edges()
            .iter()
            .enumerate()
            .map(|(d, &(i, _))| (g.directed_weight(d) * ell[i]).ln())
            .collect();
        let tree_edges: Vec<_> = tree.edges().collect();
        Self {
            base: -exposure(g, ell),
            ln_rate,
            tree_ids: tree.directed_ids(g),
            tree_ln_ell: tree_edges.iter().map(|&(i, _)| ell[i].ln()).collect(),
        }
    }

    fn eval(&self, k: &[u64]) -> f64 {
        let mut log = self.base;
        for (t, &d) in self.tree_ids.iter().enumerate() {
            if k[d] == 0 {
                return f64::NEG_INFINITY;
            }
            log += (k[d] as f64).ln() - self.tree_ln_ell[t];
        }
        for (&kd, &c) in k.iter().zip(&self.ln_rate) {
            if kd > 0 {
                log += kd as f64 * c - ln_factorial(kd);
            }
        }
        log
    }
}

/// Log of the joint density of `(k, ℓ, T)`:
/// `exp(-sum W_i ℓ_i) prod_{ij} (W_ij ℓ_i)^{k_ij} / k_ij! prod_{ij ∈ T} k_ij / ℓ_i`.
pub fn prop1_log_density(g: &WeightedGraph, o: &JointOutcome) -> Result<LogDensity, DensityError> {
    o.validate(g)?;
    let k = match &o.crossings {
        CrossingData::Counts(k) => k,
        CrossingData::Current(_) => {
            return Err(DensityError::InvalidOutcome("crossing counts required".into()))
        }
    };
    let log = Prop1Evaluator::new(g, &o.ell.0, &o.tree).eval(&k.0);
    Ok(if log == f64::NEG_INFINITY { LogDensity::ZERO } else { LogDensity(log) })
}

pub(crate) fn prop1_unchecked(
    g: &WeightedGraph,
    ell: &[f64],
    tree: &OrientedTree,
    k: &CrossingCounts,
) -> LogDensity {
    let log = Prop1Evaluator::new(g, ell, tree).eval(&k.0);
    if log == f64::NEG_INFINITY {
        LogDensity::ZERO
    } else {
        LogDensity(log)
    }
}

/// Orientation `p -> q` of every undirected edge with `a_pq >= 0`; ties go
/// from the smaller to the larger index.
pub fn nonnegative_orientation(g: &WeightedGraph, a: &Current) -> Vec<DirectedEdgeId> {
    g.edges()
        .iter()
        .map(|e| {
            let d = g.directed_index(e.u, e.v).expect("edge");
            if a.0[d] >= 0 {
                d
            } else {
                g.reverse(d)
            }
        })
        .collect()
}

/// Sums the crossing-count density over every `k` with `a(k) = a` whose
/// reverse counts are at most `max_reverse` on each edge.
pub fn sum_prop1_over_k(
    g: &WeightedGraph,
    o: &JointOutcome,
    max_reverse: u64,
) -> Result<LogDensity, DensityError> {
    o.validate(g)?;
    let a = o.current(g);
    let forward = nonnegative_orientation(g, &a);
    let eval = Prop1Evaluator::new(g, &o.ell.0, &o.tree);

    let mut k = vec![0u64; g.num_directed()];
    let set = |k: &mut [u64], e: usize, m: u64| {
        let d = forward[e];
        k[d] = m + a.0[d] as u64;
        k[g.reverse(d)] = m;
    };
    let mut odometer = vec![0u64; forward.len()];
    for e in 0..forward.len() {
        set(&mut k, e, 0);
    }
    let mut acc = LogSum::new();
    'grid: loop {
        acc.add(eval.eval(&k));
        for (e, r) in odometer.iter_mut().enumerate() {
            if *r < max_reverse {
                *r += 1;
                set(&mut k, e, *r);
                continue 'grid;
            }
            *r = 0;
            set(&mut k, e, 0);
        }
        break;
    }
    Ok(acc.value())
}

/// `v -> parent` map of a tree graph oriented toward `root`.
pub fn orient_toward(g: &WeightedGraph, root: VertexId) -> OrientedTree {
    let n = g.n();
    let mut next = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        for nb in g.neighbors(x) {
            if !seen[nb.vertex] {
                seen[nb.vertex] = true;
                next[nb.vertex] = Some(x);
                queue.push_back(nb.vertex);
            }
        }
    }
    let edges: Vec<_> = next
        .iter()
        .enumerate()
        .filter_map(|(v, p)| p.map(|p| (v, p)))
        .collect();
    OrientedTree::from_edges(g, root, &edges).expect("BFS tree of a connected graph")
}

/// Log-density of the free local times `ℓ_{V \ {i0}}` at the first time the
/// local time at `i0` exceeds `u`, for a walk started at `i0` on a tree
/// graph, on the event that every vertex is visited.
///
/// `ell_rest` lists the local times of the vertices other than `i0` in
/// increasing index order. The density is
/// `exp(-sum W_i ℓ_i) prod_e W_e I_1(2 W_e sqrt(ℓ_i ℓ_j)) prod_{i -> p} sqrt(ℓ_p / ℓ_i)`
/// where `i -> p` runs over the edges oriented toward `i0`.
pub fn ray_knight_tree_density(
    g: &WeightedGraph,
    i0: VertexId,
    u: f64,
    ell_rest: &[f64],
) -> Result<LogDensity, DensityError> {
    if !g.is_tree() {
        return Err(DensityError::NotATree { vertices: g.n(), edges: g.edges().len() });
    }
    let ell = full_local_times(g, i0, u, ell_rest)?;
    let tree = orient_toward(g, i0);
    let mut log = -exposure(g, &ell);
    for e in g.edges() {
        let z = 2.0 * e.weight * (ell[e.u] * ell[e.v]).sqrt();
        log += e.weight.ln() + log_bessel_i(1, z)?;
    }
    for (i, p) in tree.edges() {
        log += 0.5 * (ell[p].ln() - ell[i].ln());
    }
    Ok(LogDensity(log))
}

/// Inserts `u` at position `i0` of `ell_rest`.
pub fn full_local_times(
    g: &WeightedGraph,
    i0: VertexId,
    u: f64,
    ell_rest: &[f64],
) -> Result<Vec<f64>, DensityError> {
    if i0 >= g.n() {
        return Err(DensityError::InvalidOutcome(format!("vertex {i0} out of range")));
    }
    if ell_rest.len() + 1 != g.n() {
        return Err(DensityError::InvalidOutcome(format!(
            "{} free local times for {} vertices",
            ell_rest.len(),
            g.n()
        )));
    }
    if !(u > 0.0) || ell_rest.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(DensityError::InvalidOutcome("local times must be positive".into()));
    }
    let mut ell = ell_rest.to_vec();
    ell.insert(i0, u);
    Ok(ell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::bessel_i;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn two(w: f64) -> WeightedGraph {
        WeightedGraph::from_indices(2, &[(0, 1, w)]).unwrap()
    }

    fn unit_flow_outcome(g: &WeightedGraph, ell: [f64; 2]) -> JointOutcome {
        let tree = OrientedTree::from_edges(g, 1, &[(0, 1)]).unwrap();
        let a = Current::from_oriented(g, &[(0, 1, 1)]).unwrap();
        JointOutcome::with_current(g, 0, 1, LocalTimes(ell.to_vec()), tree, a).unwrap()
    }

    #[test]
    fn two_vertex_closed_form() {
        // Summing the count density over k_10 = m, k_01 = m + 1 gives
        // W e^{-W(ℓ0+ℓ1)} sum_m (W^2 ℓ0 ℓ1)^m / (m!)^2 = W e^{..} I_0(2W sqrt(ℓ0 ℓ1)).
        let w = 1.7;
        let g = two(w);
        let (l0, l1) = (0.6, 1.9);
        let o = unit_flow_outcome(&g, [l0, l1]);
        let got = theorem1_log_density(&g, &o).unwrap().density();
        let mut series = 0.0;
        let mut term = 1.0;
        for m in 0..80 {
            if m > 0 {
                term *= w * w * l0 * l1 / (m as f64 * m as f64);
            }
            series += term;
        }
        let expect = w * (-w * (l0 + l1)).exp() * series;
        assert!(rel(got, expect) < 1e-13);
        let via_bessel = w * (-w * (l0 + l1)).exp() * bessel_i(0, 2.0 * w * (l0 * l1).sqrt()).unwrap();
        assert!(rel(got, via_bessel) < 1e-13);
    }

    #[test]
    fn wrong_divergence_is_invalid() {
        let g = two(1.0);
        let tree = OrientedTree::from_edges(&g, 1, &[(0, 1)]).unwrap();
        let a = Current::from_oriented(&g, &[(0, 1, 2)]).unwrap();
        let r = JointOutcome::with_current(&g, 0, 1, LocalTimes(vec![1.0, 1.0]), tree, a);
        assert!(matches!(r, Err(DensityError::InvalidOutcome(_))));
    }

    #[test]
    fn outcome_validation() {
        let g = two(1.0);
        let tree = OrientedTree::from_edges(&g, 1, &[(0, 1)]).unwrap();
        let a = Current::from_oriented(&g, &[(0, 1, 1)]).unwrap();
        // zero local time
        assert!(JointOutcome::with_current(&g, 0, 1, LocalTimes(vec![0.0, 1.0]), tree.clone(), a.clone()).is_err());
        // root mismatch
        assert!(JointOutcome::with_current(&g, 1, 0, LocalTimes(vec![1.0, 1.0]), tree.clone(), a.clone()).is_err());
        // non-antisymmetric current
        assert!(JointOutcome::with_current(&g, 0, 1, LocalTimes(vec![1.0, 1.0]), tree.clone(), Current(vec![1, 0])).is_err());
        // counts must be supplied to the count density
        let o = unit_flow_outcome(&g, [1.0, 1.0]);
        assert!(prop1_log_density(&g, &o).is_err());
    }

    #[test]
    fn prop1_single_jump() {
        let w = 1.3;
        let g = two(w);
        let tree = OrientedTree::from_edges(&g, 1, &[(0, 1)]).unwrap();
        let o = JointOutcome::with_counts(&g, 0, 1, LocalTimes(vec![0.4, 1.6]), tree, CrossingCounts(vec![1, 0])).unwrap();
        let got = prop1_log_density(&g, &o).unwrap().density();
        assert!(rel(got, w * (-w * 2.0f64).exp()) < 1e-14);
    }

    #[test]
    fn prop1_two_jumps() {
        let w = 0.8;
        let g = two(w);
        let tree = OrientedTree::from_edges(&g, 0, &[(1, 0)]).unwrap();
        let (l0, l1) = (1.1, 0.7);
        let o = JointOutcome::with_counts(&g, 0, 0, LocalTimes(vec![l0, l1]), tree, CrossingCounts(vec![1, 1])).unwrap();
        let got = prop1_log_density(&g, &o).unwrap().density();
        assert!(rel(got, w * w * l0 * (-w * (l0 + l1)).exp()) < 1e-14);
    }

    #[test]
    fn prop1_tree_edge_without_crossing_is_zero() {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        // 0 -> 2 -> 1, tree claims 0's last exit was toward 1.
        let tree = OrientedTree::from_edges(&g, 1, &[(0, 1), (2, 1)]).unwrap();
        let mut k = vec![0u64; 6];
        k[g.directed_index(0, 2).unwrap()] = 1;
        k[g.directed_index(2, 1).unwrap()] = 1;
        let o = JointOutcome::with_counts(&g, 0, 1, LocalTimes(vec![1.0; 3]), tree, CrossingCounts(k)).unwrap();
        assert!(prop1_log_density(&g, &o).unwrap().is_zero());
    }

    #[test]
    fn series_sum_single_term() {
        let g = two(1.0);
        let o = unit_flow_outcome(&g, [0.5, 0.5]);
        let single = sum_prop1_over_k(&g, &o, 0).unwrap();
        let tree = OrientedTree::from_edges(&g, 1, &[(0, 1)]).unwrap();
        let ko = JointOutcome::with_counts(&g, 0, 1, LocalTimes(vec![0.5, 0.5]), tree, CrossingCounts(vec![1, 0])).unwrap();
        assert_eq!(single, prop1_log_density(&g, &ko).unwrap());
    }

    #[test]
    fn series_sum_zero_current_on_tree_edge_is_zero() {
        let g = two(1.0);
        let tree = OrientedTree::from_edges(&g, 0, &[(1, 0)]).unwrap();
        let o = JointOutcome::with_current(&g, 0, 0, LocalTimes(vec![1.0, 1.0]), tree, Current::zero(&g)).unwrap();
        assert!(sum_prop1_over_k(&g, &o, 0).unwrap().is_zero());
        assert!(!sum_prop1_over_k(&g, &o, 1).unwrap().is_zero());
    }

    #[test]
    fn series_sum_converges_on_two_vertices() {
        let g = two(2.0);
        let o = unit_flow_outcome(&g, [1.2, 0.9]);
        let closed = theorem1_log_density(&g, &o).unwrap().density();
        let summed = sum_prop1_over_k(&g, &o, 60).unwrap().density();
        assert!(rel(summed, closed) < 1e-10);
    }

    #[test]
    fn half_powers_agree() {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let tree = OrientedTree::from_edges(&g, 2, &[(0, 1), (1, 2)]).unwrap();
        let a = Current::from_oriented(&g, &[(0, 1, 3), (1, 2, 2), (0, 2, -2)]).unwrap();
        let t = tilde_current(&g, &a, &tree).unwrap();
        let ell = [0.3, 2.2, 1.4];
        let v = half_power_log_by_vertex(&t, &ell);
        let e = half_power_log_by_edge(&g, &t, &ell);
        assert!((v - e).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn ray_knight_two_vertices() {
        let w = 1.4;
        let g = two(w);
        let (u, l1) = (0.8, 1.3);
        let got = ray_knight_tree_density(&g, 0, u, &[l1]).unwrap().density();
        let z = 2.0 * w * (u * l1).sqrt();
        let expect = w * (-w * (u + l1)).exp() * bessel_i(1, z).unwrap() * (u / l1).sqrt();
        assert!(rel(got, expect) < 1e-13);
    }

    #[test]
    fn ray_knight_direct_two_vertex_law() {
        // n excursions from 0 with n ~ Poisson(W u), each of Exp(W) length:
        // density of ℓ1 = sum_n e^{-Wu} (Wu)^n / n! * W^n ℓ1^{n-1} e^{-W ℓ1} / (n-1)!.
        let w = 0.9;
        let g = two(w);
        let u = 1.5;
        for l1 in [0.2f64, 1.0, 3.7] {
            let mut s = 0.0;
            let mut ln_fact_n = 0.0f64;
            let mut ln_fact_nm1 = 0.0f64;
            for n in 1..120u32 {
                ln_fact_n += (n as f64).ln();
                if n > 1 {
                    ln_fact_nm1 += ((n - 1) as f64).ln();
                }
                let ln_term = -w * u + n as f64 * (w * u).ln() - ln_fact_n
                    + n as f64 * w.ln() + (n - 1) as f64 * l1.ln() - w * l1 - ln_fact_nm1;
                s += ln_term.exp();
            }
            let got = ray_knight_tree_density(&g, 0, u, &[l1]).unwrap().density();
            assert!(rel(got, s) < 1e-12, "l1={l1}: {got} vs {s}");
            // Without the sqrt(ℓ_parent / ℓ_child) factor the product of I_1
            // terms does not reproduce the law.
            let bare = w * (-w * (u + l1)).exp() * bessel_i(1, 2.0 * w * (u * l1).sqrt()).unwrap();
            if (u / l1 - 1.0).abs() > 0.1 {
                assert!(rel(bare, s) > 1e-2);
            }
        }
    }

    #[test]
    fn ray_knight_matches_joint_density_on_path() {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.2), (1, 2, 0.7)]).unwrap();
        for i0 in 0..3 {
            let tree = orient_toward(&g, i0);
            let ell_rest = [0.9, 1.6];
            let u = 0.5;
            let ell = full_local_times(&g, i0, u, &ell_rest).unwrap();
            let o = JointOutcome::with_current(&g, i0, i0, LocalTimes(ell), tree, Current::zero(&g)).unwrap();
            let thm = theorem1_log_density(&g, &o).unwrap().ln();
            let rk = ray_knight_tree_density(&g, i0, u, &ell_rest).unwrap().ln();
            assert!((thm - rk).abs() < 1e-12, "i0={i0}");
        }
    }

    #[test]
    fn ray_knight_rejects_cycles() {
        let g = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert!(matches!(
            ray_knight_tree_density(&g, 0, 1.0, &[1.0, 1.0]),
            Err(DensityError::NotATree { .. })
        ));
    }

    #[test]
    fn log_sum_handles_zero_terms() {
        let mut s = LogSum::new();
        assert!(s.value().is_zero());
        s.add(f64::NEG_INFINITY);
        s.add(0.0);
        s.add(0.0);
        assert!((s.value().ln() - 2f64.ln()).abs() < 1e-15);
    }
}
