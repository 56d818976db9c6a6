//! Spanning trees, the weighted matrix-tree determinant, and the linear map
//! that extends off-tree cycling numbers to a full current.

use thiserror::Error;

use crate::density::orient_toward;
use crate::graph::{VertexId, WeightedGraph};
use crate::statistics::{Current, OrientedTree};

/// Default vertex cap for explicit tree enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("GraphTooLarge: {n} vertices exceeds the cap of {cap}")]
    GraphTooLarge { n: usize, cap: usize },
    #[error("TreeNotSpanning: tree covers {covered} of {n} vertices")]
    TreeNotSpanning { covered: usize, n: usize },
    #[error("UnknownVertex: index {0}")]
    UnknownVertex(VertexId),
    #[error("WrongCoordinateCount: expected {expected} off-tree values, got {got}")]
    WrongCoordinateCount { expected: usize, got: usize },
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// All spanning trees of `g`, oriented toward `root`, with the default cap.
pub fn enumerate_spanning_trees(
    g: &WeightedGraph,
    root: VertexId,
) -> Result<Vec<OrientedTree>, TreeError> {
    enumerate_spanning_trees_capped(g, root, DEFAULT_ENUMERATION_CAP)
}

/// Include/exclude recursion over the edge list: an edge is either contracted
/// into the current forest or deleted, pruning branches that close a cycle or
/// can no longer connect the graph.
pub fn enumerate_spanning_trees_capped(
    g: &WeightedGraph,
    root: VertexId,
    cap: usize,
) -> Result<Vec<OrientedTree>, TreeError> {
    let n = g.n();
    if n > cap {
        return Err(TreeError::GraphTooLarge { n, cap });
    }
    if root >= n {
        return Err(TreeError::UnknownVertex(root));
    }
    let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    let mut chosen = Vec::with_capacity(n - 1);
    let mut out = Vec::new();
    recurse(g, &edges, 0, &mut chosen, root, &mut out);
    Ok(out)
}

fn connectable(n: usize, chosen: &[usize], rest: &[(usize, usize)], edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut comps = n;
    for &(u, v) in chosen.iter().map(|&c| &edges[c]).chain(rest) {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            comps -= 1;
        }
    }
    comps == 1
}

fn creates_cycle(n: usize, chosen: &[usize], edges: &[(usize, usize)], (u, v): (usize, usize)) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    for &c in chosen {
        let (a, b) = (find(&mut parent, edges[c].0), find(&mut parent, edges[c].1));
        parent[a] = b;
    }
    find(&mut parent, u) == find(&mut parent, v)
}

fn recurse(
    g: &WeightedGraph,
    edges: &[(usize, usize)],
    idx: usize,
    chosen: &mut Vec<usize>,
    root: VertexId,
    out: &mut Vec<OrientedTree>,
) {
    let n = g.n();
    if chosen.len() == n - 1 {
        out.push(orient(g, edges, chosen, root));
        return;
    }
    if idx == edges.len() || edges.len() - idx < n - 1 - chosen.len() {
        return;
    }
    // contract
    if !creates_cycle(n, chosen, edges, edges[idx]) {
        chosen.push(idx);
        recurse(g, edges, idx + 1, chosen, root, out);
        chosen.pop();
    }
    // delete
    if connectable(n, chosen, &edges[idx + 1..], edges) {
        recurse(g, edges, idx + 1, chosen, root, out);
    }
}

fn orient(g: &WeightedGraph, edges: &[(usize, usize)], chosen: &[usize], root: VertexId) -> OrientedTree {
    let n = g.n();
    let mut adj = vec![Vec::new(); n];
    for &c in chosen {
        let (u, v) = edges[c];
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut next = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                next[y] = Some(x);
                stack.push(y);
            }
        }
    }
    let tree_edges: Vec<_> = next
        .iter()
        .enumerate()
        .filter_map(|(v, p)| p.map(|p| (v, p)))
        .collect();
    OrientedTree::from_edges(g, root, &tree_edges).expect("spanning tree")
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty");
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot = &top[col];
        for row in rest.iter_mut() {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    det
}

/// Weighted Laplacian `L_ii = W_i`, `L_ij = -W_ij`.
pub fn laplacian(g: &WeightedGraph) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut l = vec![vec![0.0; n]; n];
    for e in g.edges() {
        l[e.u][e.v] -= e.weight;
        l[e.v][e.u] -= e.weight;
        l[e.u][e.u] += e.weight;
        l[e.v][e.v] += e.weight;
    }
    l
}

/// `sum_T prod_{(i,j) ∈ T} W_ij` over spanning trees oriented toward `root`,
/// as the determinant of the Laplacian with row and column `root` removed.
pub fn weighted_tree_sum(g: &WeightedGraph, root: VertexId) -> Result<f64, TreeError> {
    if root >= g.n() {
        return Err(TreeError::UnknownVertex(root));
    }
    let minor: Vec<Vec<f64>> = laplacian(g)
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| i != root)
        .map(|(_, row)| {
            row.into_iter()
                .enumerate()
                .filter(|&(j, _)| j != root)
                .map(|(_, x)| x)
                .collect()
        })
        .collect();
    Ok(determinant(minor))
}

/// Product of tree-edge weights.
pub fn tree_weight(g: &WeightedGraph, tree: &OrientedTree) -> f64 {
    tree.edges()
        .map(|(i, j)| g.weight(i, j).expect("tree edge"))
        .product()
}

/// Undirected off-tree edges as `(u, v)` with `u < v`, in lexicographic order.
pub fn off_tree_edges(g: &WeightedGraph, tree: &OrientedTree) -> Vec<(VertexId, VertexId)> {
    g.edges()
        .iter()
        .filter(|e| !tree.contains(e.u, e.v) && !tree.contains(e.v, e.u))
        .map(|e| (e.u, e.v))
        .collect()
}

/// Returns the unique current whose value on each off-tree edge `(u, v)`
/// (`u < v`, lexicographic order) is `offtree_values`, and whose divergence is
/// `δ_{i0} - δ_{i1}`.
pub fn extend_cycling_numbers(
    g: &WeightedGraph,
    tree: &OrientedTree,
    offtree_values: &[i64],
    (i0, i1): (VertexId, VertexId),
) -> Result<Current, TreeError> {
    let n = g.n();
    if !tree.is_spanning() {
        return Err(TreeError::TreeNotSpanning { covered: tree.num_members(), n });
    }
    if i0 >= n || i1 >= n {
        return Err(TreeError::UnknownVertex(i0.max(i1)));
    }
    let off = off_tree_edges(g, tree);
    if off.len() != offtree_values.len() {
        return Err(TreeError::WrongCoordinateCount { expected: off.len(), got: offtree_values.len() });
    }
    let mut a = Current::zero(g);
    let mut div = vec![0i64; n];
    for (&(u, v), &c) in off.iter().zip(offtree_values) {
        let d = g.directed_index(u, v).expect("edge");
        a.0[d] = c;
        a.0[g.reverse(d)] = -c;
        div[u] += c;
        div[v] -= c;
    }
    // Leaves first: process vertices by decreasing depth.
    let depth = |mut v: VertexId| {
        let mut k = 0;
        while let Some(p) = tree.next(v) {
            v = p;
            k += 1;
        }
        k
    };
    let mut order: Vec<VertexId> = (0..n).filter(|&v| v != tree.root()).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(depth(v)));
    for v in order {
        let p = tree.next(v).expect("non-root has a parent");
        let need = i64::from(v == i0) - i64::from(v == i1) - div[v];
        let d = g.directed_index(v, p).expect("tree edge");
        a.0[d] = need;
        a.0[g.reverse(d)] = -need;
        div[v] += need;
        div[p] -= need;
    }
    assert!(a.has_boundary(g, i0, i1), "extension missed the prescribed divergence");
    Ok(a)
}

/// Fundamental cycles of `tree`: for each off-tree edge `(u, v)` the
/// zero-divergence current with value 1 on it and 0 on the other off-tree edges.
pub fn fundamental_cycles(g: &WeightedGraph, tree: &OrientedTree) -> Result<Vec<Current>, TreeError> {
    let m = off_tree_edges(g, tree).len();
    (0..m)
        .map(|c| {
            let mut v = vec![0i64; m];
            v[c] = 1;
            extend_cycling_numbers(g, tree, &v, (tree.root(), tree.root()))
        })
        .collect()
}

/// A BFS spanning tree rooted at `root`.
pub fn bfs_tree(g: &WeightedGraph, root: VertexId) -> OrientedTree {
    orient_toward(g, root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> WeightedGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j, 1.0));
            }
        }
        WeightedGraph::from_indices(n, &e).unwrap()
    }

    #[test]
    fn tree_counts() {
        assert_eq!(enumerate_spanning_trees(&complete(2), 0).unwrap().len(), 1);
        assert_eq!(enumerate_spanning_trees(&complete(3), 1).unwrap().len(), 3);
        assert_eq!(enumerate_spanning_trees(&complete(4), 2).unwrap().len(), 16);
        assert_eq!(enumerate_spanning_trees(&complete(5), 0).unwrap().len(), 125);
    }

    #[test]
    fn enumerated_trees_are_distinct_and_rooted() {
        let trees = enumerate_spanning_trees(&complete(4), 3).unwrap();
        for (a, t) in trees.iter().enumerate() {
            assert_eq!(t.root(), 3);
            assert!(t.is_spanning());
            for u in &trees[a + 1..] {
                assert_ne!(t, u);
            }
        }
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            enumerate_spanning_trees_capped(&complete(4), 0, 3),
            Err(TreeError::GraphTooLarge { n: 4, cap: 3 })
        ));
    }

    #[test]
    fn matrix_tree_small_cases() {
        let g = WeightedGraph::from_indices(2, &[(0, 1, 2.5)]).unwrap();
        assert!((weighted_tree_sum(&g, 0).unwrap() - 2.5).abs() < 1e-14);
        let tri = WeightedGraph::from_indices(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]).unwrap();
        for root in 0..3 {
            assert!((weighted_tree_sum(&tri, root).unwrap() - 11.0).abs() < 1e-12);
        }
        let explicit: f64 = enumerate_spanning_trees(&tri, 0)
            .unwrap()
            .iter()
            .map(|t| tree_weight(&tri, t))
            .sum();
        assert!((explicit - 11.0).abs() < 1e-12);
    }

    #[test]
    fn extension_without_cycles() {
        let tri = complete(3);
        let tree = OrientedTree::from_edges(&tri, 2, &[(0, 1), (1, 2)]).unwrap();
        let zero = extend_cycling_numbers(&tri, &tree, &[0], (1, 1)).unwrap();
        assert_eq!(zero, Current::zero(&tri));
        let flow = extend_cycling_numbers(&tri, &tree, &[0], (0, 2)).unwrap();
        assert_eq!(flow.get(&tri, 0, 1), Some(1));
        assert_eq!(flow.get(&tri, 1, 2), Some(1));
        assert_eq!(flow.get(&tri, 0, 2), Some(0));
    }

    #[test]
    fn extension_triangle_cycle() {
        // Hand solution of the 3x3 divergence system: with a_20 = c and zero
        // divergence, a_01 = a_12 = c.
        let tri = complete(3);
        for root in 0..3 {
            let tree = if root == 1 {
                OrientedTree::from_edges(&tri, 1, &[(0, 1), (2, 1)]).unwrap()
            } else if root == 0 {
                OrientedTree::from_edges(&tri, 0, &[(1, 0), (2, 1)]).unwrap()
            } else {
                OrientedTree::from_edges(&tri, 2, &[(0, 1), (1, 2)]).unwrap()
            };
            for c in [-3i64, 1, 4] {
                let a = extend_cycling_numbers(&tri, &tree, &[-c], (0, 0)).unwrap();
                assert_eq!(a.get(&tri, 0, 1), Some(c));
                assert_eq!(a.get(&tri, 1, 2), Some(c));
                assert_eq!(a.get(&tri, 2, 0), Some(c));
            }
        }
    }

    #[test]
    fn extension_errors() {
        let tri = complete(3);
        let partial = OrientedTree::from_edges(&tri, 1, &[(0, 1)]).unwrap();
        assert!(matches!(
            extend_cycling_numbers(&tri, &partial, &[0, 0], (0, 1)),
            Err(TreeError::TreeNotSpanning { .. })
        ));
        let tree = bfs_tree(&tri, 0);
        assert!(matches!(
            extend_cycling_numbers(&tri, &tree, &[], (0, 1)),
            Err(TreeError::WrongCoordinateCount { expected: 1, got: 0 })
        ));
    }

    #[test]
    fn cycles_have_zero_divergence() {
        let g = complete(5);
        let tree = bfs_tree(&g, 2);
        let cycles = fundamental_cycles(&g, &tree).unwrap();
        assert_eq!(cycles.len(), g.cycle_rank());
        for c in &cycles {
            assert!(c.is_antisymmetric(&g));
            assert!(c.divergence(&g).iter().all(|&d| d == 0));
        }
    }

    #[test]
    fn determinant_basics() {
        assert_eq!(determinant(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        assert_eq!(determinant(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
        assert!((determinant(vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]) - 18.0).abs() < 1e-12);
    }
}
