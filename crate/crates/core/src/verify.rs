//! Monte Carlo checks of the closed-form densities.
//!
//! Each check simulates `n` independent paths, counts those whose statistics
//! land in a target event, and compares the hit fraction with the density
//! integrated over the event's local-time cell by tensor Gauss–Legendre
//! quadrature. The comparison is a binomial z-score under the theoretical
//! probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::density::{
    prop1_unchecked, ray_knight_tree_density, theorem1_unchecked, DensityError, LogDensity, LogSum,
};
use crate::graph::{VertexId, WeightedGraph};
use crate::quadrature::{integrate_clipped_box, GaussLegendre};
use crate::simulate::{batch_count, simulate_path, JumpPath, RngStream, SimError, StoppingRule};
use crate::statistics::{
    crossings, current_of, last_exit_tree, local_times, CrossingCounts, Current, OrientedTree,
};
use crate::trees_cycles::{enumerate_spanning_trees, extend_cycling_numbers, off_tree_edges, TreeError};

/// Default pass threshold on `|z|`.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;
/// Default Gauss–Legendre nodes per free dimension.
pub const DEFAULT_QUAD_NODES: usize = 32;
/// Default cycling-number truncation for marginal and total-mass sums.
pub const DEFAULT_CYCLE_TRUNCATION: i64 = 8;
/// Largest graph accepted by the total-mass check.
pub const TOTAL_MASS_MAX_VERTICES: usize = 4;
/// Largest graph accepted by the marginal density.
pub const MARGINAL_MAX_VERTICES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("InvalidTarget: {0}")]
    InvalidTarget(String),
    #[error("InvalidCell: {0}")]
    InvalidCell(String),
    #[error("GraphTooLarge: {n} vertices exceeds the cap of {cap}")]
    GraphTooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub z_threshold: f64,
    pub quad_nodes: usize,
    /// Multiplier applied to the theoretical density; 1.0 except when
    /// checking that a wrong formula is detected.
    pub density_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            z_threshold: DEFAULT_Z_THRESHOLD,
            quad_nodes: DEFAULT_QUAD_NODES,
            density_scale: 1.0,
        }
    }
}

/// Box on the free local-time coordinates; the `dependent` vertex is left
/// out (its local time is implied by the horizon, or fixed by the stopping
/// rule).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeCell {
    pub dependent: VertexId,
    /// Free vertices in increasing order.
    pub free: Vec<VertexId>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl LocalTimeCell {
    /// `bounds[v] = (lo, hi)` for every vertex other than `dependent`.
    pub fn new(
        g: &WeightedGraph,
        dependent: VertexId,
        bounds: &[(VertexId, f64, f64)],
    ) -> Result<Self, VerifyError> {
        let n = g.n();
        if dependent >= n {
            return Err(VerifyError::InvalidCell(format!("dependent vertex {dependent} out of range")));
        }
        let mut b = vec![None; n];
        for &(v, lo, hi) in bounds {
            if v >= n || v == dependent {
                return Err(VerifyError::InvalidCell(format!("vertex {v} cannot carry a bound")));
            }
            if b[v].is_some() {
                return Err(VerifyError::InvalidCell(format!("vertex {v} bounded twice")));
            }
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(VerifyError::InvalidCell(format!("bad interval [{lo}, {hi}) at {v}")));
            }
            b[v] = Some((lo, hi));
        }
        let free: Vec<VertexId> = (0..n).filter(|&v| v != dependent).collect();
        let mut lo = Vec::with_capacity(n - 1);
        let mut hi = Vec::with_capacity(n - 1);
        for &v in &free {
            let (l, h) = b[v].ok_or_else(|| VerifyError::InvalidCell(format!("vertex {v} has no bound")))?;
            lo.push(l);
            hi.push(h);
        }
        Ok(Self { dependent, free, lo, hi })
    }

    /// True when every free coordinate of `ell` lies in its interval.
    pub fn contains(&self, ell: &[f64]) -> bool {
        self.free
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| ell[v] >= lo && ell[v] < hi)
    }

    /// Full local-time vector from free coordinates and the dependent value.
    fn assemble(&self, free_values: &[f64], dependent_value: f64, out: &mut [f64]) {
        for (&v, &x) in self.free.iter().zip(free_values) {
            out[v] = x;
        }
        out[self.dependent] = dependent_value;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n_paths: u64,
    pub n_hits: u64,
    pub empirical_prob: f64,
    /// `sqrt(p (1 - p) / n)` at the empirical `p`.
    pub std_error: f64,
    pub theory_prob: f64,
    pub z_score: f64,
    pub z_threshold: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(n_paths: u64, n_hits: u64, theory_prob: f64, z_threshold: f64) -> Self {
        let n = n_paths as f64;
        let p = n_hits as f64 / n;
        let std_error = (p * (1.0 - p) / n).sqrt();
        let null_se = (theory_prob * (1.0 - theory_prob) / n).sqrt();
        let z_score = if null_se > 0.0 {
            (p - theory_prob) / null_se
        } else if p == theory_prob {
            0.0
        } else {
            // the theory rules the observed outcome out entirely
            (p - theory_prob).signum() * f64::MAX
        };
        Self {
            n_paths,
            n_hits,
            empirical_prob: p,
            std_error,
            theory_prob,
            z_score,
            z_threshold,
            pass: z_score.abs() <= z_threshold,
        }
    }

    pub fn csv_header() -> &'static str {
        "n_paths,n_hits,empirical_prob,std_error,theory_prob,z_score,z_threshold,pass"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.6},{},{}",
            self.n_paths,
            self.n_hits,
            self.empirical_prob,
            self.std_error,
            self.theory_prob,
            self.z_score,
            self.z_threshold,
            self.pass
        )
    }
}

fn check_sigma(sigma: f64) -> Result<(), VerifyError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(VerifyError::InvalidTarget(format!("sigma must be positive, got {sigma}")))
    }
}

fn check_tree(g: &WeightedGraph, tree: &OrientedTree) -> Result<(), VerifyError> {
    if tree.validate(g).is_err() || !tree.is_spanning() {
        return Err(VerifyError::InvalidTarget("target tree is not a spanning tree of the graph".into()));
    }
    Ok(())
}

/// Integrates `density(ℓ)` over the free coordinates of `cell`, with the
/// dependent coordinate set to `horizon - sum(free)` (which must stay positive).
fn integrate_over_simplex_cell<F>(rule: &GaussLegendre, cell: &LocalTimeCell, horizon: f64, n: usize, density: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_clipped_box(rule, &cell.lo, &cell.hi, horizon, &|x: &[f64]| {
        let dep = horizon - x.iter().sum::<f64>();
        if dep <= 0.0 {
            return 0.0;
        }
        let mut ell = vec![0.0; n];
        cell.assemble(x, dep, &mut ell);
        density(&ell)
    })
}

/// Target of the current/tree check.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTarget {
    pub current: Current,
    pub tree: OrientedTree,
}

/// Target of the crossing-count/tree check.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTarget {
    pub counts: CrossingCounts,
    pub tree: OrientedTree,
}

fn path_in_cell(g: &WeightedGraph, p: &JumpPath, i1: VertexId, cell: &LocalTimeCell) -> Option<Vec<f64>> {
    if p.end() != i1 {
        return None;
    }
    let ell = local_times(g, p).0;
    if ell.iter().any(|&l| l <= 0.0) || !cell.contains(&ell) {
        return None;
    }
    Some(ell)
}

/// Empirical vs. integrated probability of
/// `{a(k) = a, ℓ ∈ cell, last-exit tree = T}` at horizon `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn verify_theorem1(
    g: &WeightedGraph,
    i0: VertexId,
    sigma: f64,
    target: &CurrentTarget,
    cell: &LocalTimeCell,
    n: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    check_sigma(sigma)?;
    check_tree(g, &target.tree)?;
    let i1 = target.tree.root();
    if i0 >= g.n() {
        return Err(VerifyError::InvalidTarget(format!("start {i0} out of range")));
    }
    if !target.current.is_antisymmetric(g) || !target.current.has_boundary(g, i0, i1) {
        return Err(VerifyError::InvalidTarget(format!(
            "current must be antisymmetric with divergence δ_{i0} - δ_{i1}"
        )));
    }
    let rule = GaussLegendre::new(opts.quad_nodes);
    let theory = integrate_over_simplex_cell(&rule, cell, sigma, g.n(), |ell| {
        theorem1_unchecked(g, ell, &target.tree, &target.current)
            .map(LogDensity::density)
            .unwrap_or(f64::NAN)
    }) * opts.density_scale;
    if theory.is_nan() {
        return Err(VerifyError::InvalidTarget("density evaluation failed inside the cell".into()));
    }
    let hits = batch_count(g, i0, StoppingRule::FixedTime { sigma }, seed, n, |p| {
        path_in_cell(g, p, i1, cell).is_some()
            && current_of(g, &crossings(g, p)) == target.current
            && last_exit_tree(g, p) == target.tree
    })?;
    Ok(VerificationReport::new(n as u64, hits, theory, opts.z_threshold))
}

/// Empirical vs. integrated probability of
/// `{k = counts, ℓ ∈ cell, last-exit tree = T}` at horizon `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn verify_prop1(
    g: &WeightedGraph,
    i0: VertexId,
    sigma: f64,
    target: &CountsTarget,
    cell: &LocalTimeCell,
    n: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    check_sigma(sigma)?;
    check_tree(g, &target.tree)?;
    let i1 = target.tree.root();
    if i0 >= g.n() {
        return Err(VerifyError::InvalidTarget(format!("start {i0} out of range")));
    }
    if target.counts.0.len() != g.num_directed() {
        return Err(VerifyError::InvalidTarget("one count per directed edge required".into()));
    }
    if !current_of(g, &target.counts).has_boundary(g, i0, i1) {
        return Err(VerifyError::InvalidTarget(format!(
            "counts do not describe a path from {i0} to the tree root {i1}"
        )));
    }
    let rule = GaussLegendre::new(opts.quad_nodes);
    let theory = integrate_over_simplex_cell(&rule, cell, sigma, g.n(), |ell| {
        prop1_unchecked(g, ell, &target.tree, &target.counts).density()
    }) * opts.density_scale;
    let hits = batch_count(g, i0, StoppingRule::FixedTime { sigma }, seed, n, |p| {
        path_in_cell(g, p, i1, cell).is_some()
            && crossings(g, p) == target.counts
            && last_exit_tree(g, p) == target.tree
    })?;
    Ok(VerificationReport::new(n as u64, hits, theory, opts.z_threshold))
}

/// Inverse-local-time check on a tree graph: the walk starts at `i0` and is
/// stopped when its local time at `i0` reaches `u`; the event is that every
/// vertex was visited and the other local times lie in `cell`.
pub fn verify_ray_knight(
    g: &WeightedGraph,
    i0: VertexId,
    u: f64,
    cell: &LocalTimeCell,
    n: usize,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    if !g.is_tree() {
        return Err(DensityError::NotATree { vertices: g.n(), edges: g.edges().len() }.into());
    }
    if cell.dependent != i0 {
        return Err(VerifyError::InvalidCell(format!("cell must leave out the stopping site {i0}")));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(VerifyError::InvalidTarget(format!("u must be positive, got {u}")));
    }
    let rule = GaussLegendre::new(opts.quad_nodes);
    let theory = integrate_clipped_box(&rule, &cell.lo, &cell.hi, f64::INFINITY, &|x: &[f64]| {
        ray_knight_tree_density(g, i0, u, x).map(LogDensity::density).unwrap_or(f64::NAN)
    }) * opts.density_scale;
    if theory.is_nan() {
        return Err(VerifyError::InvalidCell("density evaluation failed inside the cell".into()));
    }
    let hits = batch_count(g, i0, StoppingRule::InverseLocalTime { site: i0, u }, seed, n, |p| {
        let ell = local_times(g, p).0;
        ell.iter().all(|&l| l > 0.0) && cell.contains(&ell)
    })?;
    Ok(VerificationReport::new(n as u64, hits, theory, opts.z_threshold))
}

/// All `(tree, current)` pairs with trees rooted at `i1`, currents of
/// divergence `δ_{i0} - δ_{i1}`, and off-tree coordinates in `[-m, m]`.
pub fn tree_current_pairs(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    m: i64,
) -> Result<Vec<(OrientedTree, Current)>, VerifyError> {
    let mut out = Vec::new();
    for tree in enumerate_spanning_trees(g, i1)? {
        let r = off_tree_edges(g, &tree).len();
        let mut coords = vec![-m; r];
        loop {
            out.push((tree.clone(), extend_cycling_numbers(g, &tree, &coords, (i0, i1))?));
            let mut carried = true;
            for c in coords.iter_mut() {
                if *c < m {
                    *c += 1;
                    carried = false;
                    break;
                }
                *c = -m;
            }
            if carried {
                break;
            }
        }
    }
    Ok(out)
}

/// Joint density of the local times and the endpoint `i1` on the event that
/// every vertex was visited, obtained by summing the current/tree density
/// over trees and truncated cycling numbers.
#[derive(Debug, Clone)]
pub struct MarginalDensity {
    pairs: Vec<(OrientedTree, Current)>,
}

impl MarginalDensity {
    pub fn new(g: &WeightedGraph, i0: VertexId, i1: VertexId, m: i64) -> Result<Self, VerifyError> {
        if g.n() > MARGINAL_MAX_VERTICES {
            return Err(VerifyError::GraphTooLarge { n: g.n(), cap: MARGINAL_MAX_VERTICES });
        }
        if i0 >= g.n() || i1 >= g.n() {
            return Err(VerifyError::InvalidTarget(format!("endpoints ({i0}, {i1}) out of range")));
        }
        Ok(Self { pairs: tree_current_pairs(g, i0, i1, m)? })
    }

    pub fn num_terms(&self) -> usize {
        self.pairs.len()
    }

    pub fn log_density(&self, g: &WeightedGraph, ell: &[f64]) -> Result<LogDensity, VerifyError> {
        let mut acc = LogSum::new();
        for (tree, a) in &self.pairs {
            acc.add(theorem1_unchecked(g, ell, tree, a)?.ln());
        }
        Ok(acc.value())
    }
}

/// Pointwise marginal log-density of the local times (with endpoint `i1`).
pub fn marginal_local_time_density(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    ell: &[f64],
    m: i64,
) -> Result<LogDensity, VerifyError> {
    if ell.len() != g.n() || ell.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(VerifyError::InvalidTarget("local times must be positive, one per vertex".into()));
    }
    MarginalDensity::new(g, i0, i1, m)?.log_density(g, ell)
}

/// Sum over trees and truncated currents of the simplex integral of the
/// current/tree density, against the probability of ending at `i1` after
/// visiting every vertex.
#[allow(clippy::too_many_arguments)]
pub fn verify_total_mass(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    sigma: f64,
    n: usize,
    seed: u64,
    m: i64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let theory = total_mass_theory(g, i0, i1, sigma, m, opts.quad_nodes)? * opts.density_scale;
    let hits = batch_count(g, i0, StoppingRule::FixedTime { sigma }, seed, n, |p| {
        p.end() == i1 && local_times(g, p).0.iter().all(|&l| l > 0.0)
    })?;
    Ok(VerificationReport::new(n as u64, hits, theory, opts.z_threshold))
}

/// Theoretical side of [`verify_total_mass`].
pub fn total_mass_theory(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    sigma: f64,
    m: i64,
    quad_nodes: usize,
) -> Result<f64, VerifyError> {
    if g.n() > TOTAL_MASS_MAX_VERTICES {
        return Err(VerifyError::GraphTooLarge { n: g.n(), cap: TOTAL_MASS_MAX_VERTICES });
    }
    check_sigma(sigma)?;
    if i0 >= g.n() || i1 >= g.n() {
        return Err(VerifyError::InvalidTarget(format!("endpoints ({i0}, {i1}) out of range")));
    }
    let bounds: Vec<_> = (0..g.n()).filter(|&v| v != i1).map(|v| (v, f64::MIN_POSITIVE, sigma)).collect();
    let mut cell = LocalTimeCell::new(g, i1, &bounds)?;
    cell.lo.iter_mut().for_each(|l| *l = 0.0);
    let rule = GaussLegendre::new(quad_nodes);
    let pairs = tree_current_pairs(g, i0, i1, m)?;
    let parts: Vec<f64> = pairs
        .par_iter()
        .map(|(tree, a)| {
            integrate_over_simplex_cell(&rule, &cell, sigma, g.n(), |ell| {
                theorem1_unchecked(g, ell, tree, a).map(LogDensity::density).unwrap_or(f64::NAN)
            })
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Probability that the marginal density assigns to `cell`.
pub fn marginal_cell_probability(
    g: &WeightedGraph,
    marginal: &MarginalDensity,
    sigma: f64,
    cell: &LocalTimeCell,
    quad_nodes: usize,
) -> f64 {
    let rule = GaussLegendre::new(quad_nodes);
    integrate_over_simplex_cell(&rule, cell, sigma, g.n(), |ell| {
        marginal.log_density(g, ell).map(LogDensity::density).unwrap_or(f64::NAN)
    })
}

/// Single-cell check of the marginal local-time density.
#[allow(clippy::too_many_arguments)]
pub fn verify_marginal(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    sigma: f64,
    cell: &LocalTimeCell,
    n: usize,
    seed: u64,
    m: i64,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let hist = verify_marginal_histogram(g, i0, i1, sigma, std::slice::from_ref(cell), n, seed, m, opts)?;
    Ok(hist.bins.into_iter().next().expect("one bin"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub bins: Vec<VerificationReport>,
    /// Bins whose empirical frequency is more than 3 standard errors off.
    pub outside_3se: usize,
    pub fraction_outside_3se: f64,
}

/// Bins the local times of `n` paths (event: end at `i1`, all vertices
/// visited) and compares each bin with the integrated marginal density.
/// Bins must be disjoint.
#[allow(clippy::too_many_arguments)]
pub fn verify_marginal_histogram(
    g: &WeightedGraph,
    i0: VertexId,
    i1: VertexId,
    sigma: f64,
    bins: &[LocalTimeCell],
    n: usize,
    seed: u64,
    m: i64,
    opts: &VerifyOptions,
) -> Result<HistogramReport, VerifyError> {
    check_sigma(sigma)?;
    let marginal = MarginalDensity::new(g, i0, i1, m)?;
    let theory: Vec<f64> = bins
        .par_iter()
        .map(|cell| marginal_cell_probability(g, &marginal, sigma, cell, opts.quad_nodes) * opts.density_scale)
        .collect();
    if theory.iter().any(|t| t.is_nan()) {
        return Err(VerifyError::InvalidCell("density evaluation failed inside a bin".into()));
    }
    let rule = StoppingRule::FixedTime { sigma };
    if i0 >= g.n() {
        return Err(VerifyError::InvalidTarget(format!("start {i0} out of range")));
    }
    let counts = (0..n)
        .into_par_iter()
        .map(|r| -> Result<Vec<u64>, SimError> {
            let p = simulate_path(g, i0, rule, RngStream::new(seed, r as u64))?;
            let mut c = vec![0u64; bins.len()];
            if p.end() == i1 {
                let ell = local_times(g, &p).0;
                if ell.iter().all(|&l| l > 0.0) {
                    if let Some(b) = bins.iter().position(|cell| cell.contains(&ell)) {
                        c[b] = 1;
                    }
                }
            }
            Ok(c)
        })
        .try_reduce(
            || vec![0u64; bins.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let reports: Vec<VerificationReport> = counts
        .iter()
        .zip(&theory)
        .map(|(&hits, &t)| VerificationReport::new(n as u64, hits, t, opts.z_threshold))
        .collect();
    let outside = reports.iter().filter(|r| r.z_score.abs() > 3.0).count();
    Ok(HistogramReport {
        fraction_outside_3se: outside as f64 / reports.len().max(1) as f64,
        outside_3se: outside,
        bins: reports,
    })
}

/// Chi-square comparison of category counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub n: u64,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub p_threshold: f64,
    pub pass: bool,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    dist.sf(statistic)
}

/// Goodness of fit of `observed` against category probabilities `probs`.
pub fn chi_square_goodness_of_fit(observed: &[u64], probs: &[f64], p_threshold: f64) -> ChiSquareReport {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let statistic = observed
        .iter()
        .zip(&expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = probs.iter().filter(|&&p| p > 0.0).count().saturating_sub(1);
    let mut p_value = chi_square_p(statistic, dof);
    // mass observed in a category of zero probability is an outright failure
    if observed.iter().zip(probs).any(|(&o, &p)| o > 0 && p == 0.0) {
        p_value = 0.0;
    }
    ChiSquareReport {
        n,
        observed: observed.to_vec(),
        expected,
        statistic,
        dof,
        p_value,
        p_threshold,
        pass: p_value > p_threshold,
    }
}

/// Two-sample homogeneity test on a 2 x K contingency table.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64], p_threshold: f64) -> ChiSquareReport {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    let mut statistic = 0.0;
    let mut used = 0usize;
    let mut expected = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        expected.push(col * na / total);
        if col == 0.0 {
            continue;
        }
        used += 1;
        let ea = col * na / total;
        let eb = col * nb / total;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = used.saturating_sub(1);
    let p_value = chi_square_p(statistic, dof);
    ChiSquareReport {
        n: (na + nb) as u64,
        observed: a.to_vec(),
        expected,
        statistic,
        dof,
        p_value,
        p_threshold,
        pass: p_value > p_threshold,
    }
}
