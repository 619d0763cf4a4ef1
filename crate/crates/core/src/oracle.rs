//! Slow reference computations straight from the kernel definitions.
//!
//! Tree-visits are materialized by enumerating simple paths, subtrees are
//! compared with the recursive subtree-matching function, and both kernels
//! are evaluated as literal sums over visit roots, heights and node pairs.
//! Nothing here touches the DAG builder or the interner.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::KernelParams;
use crate::graph::Graph;
use crate::scalar::Scalar;

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug)]
struct TreeNode {
    graph_node: usize,
    label: String,
    children: Vec<usize>,
    size: usize,
    canonical: String,
}

/// Rooted ordered tree obtained by unfolding every shortest path from the
/// root up to a height limit. Node 0 is the root.
#[derive(Clone, Debug)]
pub struct TreeVisit {
    nodes: Vec<TreeNode>,
}

impl TreeVisit {
    pub const ROOT: usize = 0;

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn label(&self, x: usize) -> &str {
        &self.nodes[x].label
    }

    pub fn graph_node(&self, x: usize) -> usize {
        self.nodes[x].graph_node
    }

    /// Children in canonical order.
    pub fn children(&self, x: usize) -> &[usize] {
        &self.nodes[x].children
    }

    /// Node count of the proper subtree rooted at `x`.
    pub fn size(&self, x: usize) -> usize {
        self.nodes[x].size
    }

    /// Canonical string of the proper subtree rooted at `x`.
    pub fn canonical(&self, x: usize) -> &str {
        &self.nodes[x].canonical
    }

    pub fn height(&self) -> usize {
        fn walk(t: &TreeVisit, x: usize) -> usize {
            t.children(x).iter().map(|&c| 1 + walk(t, c)).max().unwrap_or(0)
        }
        walk(self, Self::ROOT)
    }
}

/// Length of the shortest path from `v` to every node, considering only
/// simple paths of at most `limit` edges (`None` = unreachable within limit).
fn shortest_lengths(graph: &Graph, v: usize, limit: usize, budget: usize) -> Result<Vec<Option<usize>>> {
    let mut best = vec![None; graph.node_count()];
    let mut on_path = vec![false; graph.node_count()];
    let mut explored = 0usize;
    fn dfs(
        graph: &Graph,
        u: usize,
        len: usize,
        limit: usize,
        best: &mut [Option<usize>],
        on_path: &mut [bool],
        explored: &mut usize,
        budget: usize,
    ) -> Result<()> {
        *explored += 1;
        if *explored > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if best[u].is_none_or(|b| len < b) {
            best[u] = Some(len);
        }
        if len == limit {
            return Ok(());
        }
        on_path[u] = true;
        for &w in graph.neighbors(u) {
            if !on_path[w] {
                dfs(graph, w, len + 1, limit, best, on_path, explored, budget)?;
            }
        }
        on_path[u] = false;
        Ok(())
    }
    dfs(graph, v, 0, limit, &mut best, &mut on_path, &mut explored, budget)?;
    Ok(best)
}

/// Largest shortest-path length from `v` that does not exceed `h`.
pub fn visit_diameter(graph: &Graph, v: usize, h: usize) -> Result<usize> {
    let lengths = shortest_lengths(graph, v, h, DEFAULT_BUDGET)?;
    Ok(lengths.into_iter().flatten().max().unwrap_or(0))
}

/// Materializes the tree-visit of `graph` rooted at `v` with height `j`.
pub fn tree_visit(graph: &Graph, v: usize, j: usize, budget: usize) -> Result<TreeVisit> {
    if v >= graph.node_count() {
        return Err(Error::NodeOutOfRange {
            node: v,
            len: graph.node_count(),
        });
    }
    let lengths = shortest_lengths(graph, v, j, budget)?;
    let mut nodes: Vec<TreeNode> = Vec::new();

    // every extension keeping the path shortest becomes a new tree node
    fn unfold(
        graph: &Graph,
        u: usize,
        len: usize,
        lengths: &[Option<usize>],
        nodes: &mut Vec<TreeNode>,
        budget: usize,
    ) -> Result<usize> {
        if nodes.len() >= budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let me = nodes.len();
        nodes.push(TreeNode {
            graph_node: u,
            label: graph.label(u).as_str().to_owned(),
            children: Vec::new(),
            size: 1,
            canonical: String::new(),
        });
        let mut children = Vec::new();
        for &w in graph.neighbors(u) {
            if lengths[w] == Some(len + 1) {
                children.push(unfold(graph, w, len + 1, lengths, nodes, budget)?);
            }
        }
        children.sort_by(|&a, &b| nodes[a].canonical.cmp(&nodes[b].canonical));
        let size = 1 + children.iter().map(|&c| nodes[c].size).sum::<usize>();
        let canonical = if children.is_empty() {
            nodes[me].label.clone()
        } else {
            let parts: Vec<&str> = children.iter().map(|&c| nodes[c].canonical.as_str()).collect();
            format!("{}⌈{}⌋", nodes[me].label, parts.join("#"))
        };
        let node = &mut nodes[me];
        node.children = children;
        node.size = size;
        node.canonical = canonical;
        Ok(me)
    }

    unfold(graph, v, 0, &lengths, &mut nodes, budget)?;
    Ok(TreeVisit { nodes })
}

/// Recursive subtree matching: `lambda` per matched node, exact label
/// equality, aligned children multiplied, zero on out-degree mismatch.
pub fn c_st<T: Scalar>(t1: &TreeVisit, x1: usize, t2: &TreeVisit, x2: usize, lambda: T) -> T {
    if t1.label(x1) != t2.label(x2) {
        return T::zero();
    }
    let (c1, c2) = (t1.children(x1), t2.children(x2));
    if c1.len() != c2.len() {
        return T::zero();
    }
    let mut value = lambda;
    for (&a, &b) in c1.iter().zip(c2) {
        let sub = c_st(t1, a, t2, b, lambda);
        if sub == T::zero() {
            return T::zero();
        }
        value *= sub;
    }
    value
}

/// How child subtrees of two matching contexts are paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChildPairing {
    /// Every child of one context against every child of the other.
    AllPairs,
    /// The l-th child against the l-th child only.
    Aligned,
}

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub budget: usize,
    /// Weight matched whole visits by `lambda^size` instead of 1.
    pub weighted_root: bool,
    pub pairing: ChildPairing,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            budget: DEFAULT_BUDGET,
            weighted_root: true,
            pairing: ChildPairing::AllPairs,
        }
    }
}

/// All tree-visits `T_j(v)` for every root and `j` in `0..=diam(v)`, where
/// `diam(v)` is the deepest shortest path from `v` within the height limit.
pub fn all_tree_visits(graph: &Graph, h: usize, budget: usize) -> Result<Vec<TreeVisit>> {
    let mut trees = Vec::new();
    for v in 0..graph.node_count() {
        let diam = shortest_lengths(graph, v, h, budget)?
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0);
        for j in 0..=diam {
            trees.push(tree_visit(graph, v, j, budget)?);
        }
    }
    Ok(trees)
}

/// Plain subtree kernel: every proper subtree of every tree-visit of one
/// graph matched against every one of the other.
pub fn brute_force_odd<T: Scalar>(g1: &Graph, g2: &Graph, params: &KernelParams<T>) -> Result<T> {
    let a = all_tree_visits(g1, params.h, DEFAULT_BUDGET)?;
    let b = all_tree_visits(g2, params.h, DEFAULT_BUDGET)?;
    let mut total = T::zero();
    for t1 in &a {
        for t2 in &b {
            for x1 in 0..t1.node_count() {
                for x2 in 0..t2.node_count() {
                    total += c_st(t1, x1, t2, x2, params.lambda);
                }
            }
        }
    }
    Ok(total)
}

pub fn brute_force_tck<T: Scalar>(g1: &Graph, g2: &Graph, params: &KernelParams<T>) -> Result<T> {
    brute_force_tck_with(g1, g2, params, &OracleConfig::default())
}

/// Contexted subtree kernel: whole matching visits plus, for every pair of
/// identical subtrees, the subtree-matching value of their children.
pub fn brute_force_tck_with<T: Scalar>(
    g1: &Graph,
    g2: &Graph,
    params: &KernelParams<T>,
    config: &OracleConfig,
) -> Result<T> {
    let a = all_tree_visits(g1, params.h, config.budget)?;
    let b = all_tree_visits(g2, params.h, config.budget)?;
    let lambda = params.lambda;
    let mut total = T::zero();
    for t1 in &a {
        for t2 in &b {
            let root = TreeVisit::ROOT;
            if t1.canonical(root) == t2.canonical(root) {
                total += if config.weighted_root {
                    lambda.powi(t1.size(root) as i32)
                } else {
                    T::one()
                };
            }
            // bucket the second tree's nodes by subtree so the delta test is a lookup
            let mut by_subtree: HashMap<&str, Vec<usize>> = HashMap::new();
            for x2 in 0..t2.node_count() {
                by_subtree.entry(t2.canonical(x2)).or_default().push(x2);
            }
            for u1 in 0..t1.node_count() {
                let Some(matches) = by_subtree.get(t1.canonical(u1)) else {
                    continue;
                };
                for &u2 in matches {
                    let (c1, c2) = (t1.children(u1), t2.children(u2));
                    match config.pairing {
                        ChildPairing::AllPairs => {
                            for &l in c1 {
                                for &m in c2 {
                                    total += c_st(t1, l, t2, m, lambda);
                                }
                            }
                        }
                        ChildPairing::Aligned => {
                            for (&l, &m) in c1.iter().zip(c2) {
                                total += c_st(t1, l, t2, m, lambda);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> Graph {
        Graph::from_symbols(&["a", "b", "c", "d"], [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn single_node_tree() {
        let g = Graph::from_symbols(&["A"], []).unwrap();
        let t = tree_visit(&g, 0, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.canonical(0), "A");
    }

    #[test]
    fn four_cycle_unfolds_to_five_nodes() {
        let t = tree_visit(&cycle4(), 0, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.canonical(0), "a⌈b⌈c⌋#d⌈c⌋⌋");
        assert_eq!(t.height(), 2);
    }

    #[test]
    fn path_from_end_is_unique() {
        let g = Graph::from_symbols(&["x", "y", "z", "w"], [(0, 1), (1, 2), (2, 3)]).unwrap();
        for j in 0..5 {
            let t = tree_visit(&g, 0, j, DEFAULT_BUDGET).unwrap();
            assert_eq!(t.node_count(), (j + 1).min(4));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = cycle4();
        assert!(matches!(
            tree_visit(&g, 0, 2, 3),
            Err(Error::BudgetExceeded { budget: 3 })
        ));
    }

    #[test]
    fn c_st_examples() {
        let leaf_a = Graph::from_symbols(&["A"], []).unwrap();
        let leaf_b = Graph::from_symbols(&["B"], []).unwrap();
        let ta = tree_visit(&leaf_a, 0, 0, 10).unwrap();
        let tb = tree_visit(&leaf_b, 0, 0, 10).unwrap();
        assert_eq!(c_st(&ta, 0, &ta, 0, 0.5), 0.5);
        assert_eq!(c_st(&ta, 0, &tb, 0, 0.5), 0.0);
        let star = Graph::from_symbols(&["A", "B", "C"], [(0, 1), (0, 2)]).unwrap();
        let t = tree_visit(&star, 0, 1, 10).unwrap();
        assert_eq!(c_st(&t, 0, &t, 0, 1.0), 1.0);
        assert!((c_st(&t, 0, &t, 0, 0.5) - 0.125f64).abs() < 1e-15);
        // root against a leaf: out-degree mismatch
        assert_eq!(c_st(&t, 0, &ta, 0, 1.0), 0.0);
    }

    #[test]
    fn tiny_kernels() {
        let a = Graph::from_symbols(&["A"], []).unwrap();
        let b = Graph::from_symbols(&["B"], []).unwrap();
        let p = KernelParams::new(2, 0.6).unwrap();
        assert!((brute_force_odd(&a, &a, &p).unwrap() - 0.6f64).abs() < 1e-15);
        assert!((brute_force_tck(&a, &a, &p).unwrap() - 0.6f64).abs() < 1e-15);
        assert_eq!(brute_force_odd(&a, &b, &p).unwrap(), 0.0);
        assert_eq!(brute_force_tck(&a, &b, &p).unwrap(), 0.0);
    }

    #[test]
    fn two_node_closed_form() {
        let ab = Graph::from_symbols(&["A", "B"], [(0, 1)]).unwrap();
        for lambda in [0.5f64, 1.0, 1.2] {
            let p = KernelParams::new(1, lambda).unwrap();
            let tck = brute_force_tck(&ab, &ab, &p).unwrap();
            assert!((tck - (4.0 * lambda + 2.0 * lambda * lambda)).abs() < 1e-12);
            let odd = brute_force_odd(&ab, &ab, &p).unwrap();
            assert!((odd - (8.0 * lambda + 2.0 * lambda * lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_reading_differs_on_repeated_children() {
        // A with two B children: the all-pairs reading counts the B-B
        // combinations across positions, the aligned one does not
        let star = Graph::from_symbols(&["A", "B", "B"], [(0, 1), (0, 2)]).unwrap();
        let p = KernelParams::new(1, 1.0).unwrap();
        let all = brute_force_tck(&star, &star, &p).unwrap();
        let aligned = brute_force_tck_with(
            &star,
            &star,
            &p,
            &OracleConfig {
                pairing: ChildPairing::Aligned,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        assert!(all > aligned);
    }
}
