//! Depth-limited shortest-path DAGs rooted at a vertex.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Graph;

const ABSENT: u32 = u32::MAX;

/// The DAG of all shortest paths of length at most `h` leaving `root`.
///
/// An edge `u -> w` of the graph belongs to the DAG iff
/// `depth(w) == depth(u) + 1`; edges joining nodes at equal depth lie on no
/// shortest path and are dropped. Path counts are accumulated top-down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagVisit {
    root: usize,
    height: usize,
    depth: Vec<u32>,
    n_sp: Vec<u64>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    diam: usize,
}

/// Builds the shortest-path DAG of `graph` rooted at `root`, limited to depth `h`.
pub fn dag_visit(graph: &Graph, root: usize, h: usize) -> Result<DagVisit> {
    let n = graph.node_count();
    if root >= n {
        return Err(Error::NodeOutOfRange { node: root, len: n });
    }
    let mut depth = vec![ABSENT; n];
    let mut n_sp = vec![0u64; n];
    let mut children = vec![Vec::new(); n];
    let mut present = Vec::new();
    depth[root] = 0;
    n_sp[root] = 1;
    let mut queue = VecDeque::from([root]);
    let mut diam = 0;
    while let Some(u) = queue.pop_front() {
        present.push(u);
        let du = depth[u];
        diam = diam.max(du as usize);
        if du as usize >= h {
            continue;
        }
        for &w in graph.neighbors(u) {
            if depth[w] == ABSENT {
                depth[w] = du + 1;
                queue.push_back(w);
            }
            if depth[w] == du + 1 {
                children[u].push(w);
                // saturates only for astronomically many paths
                n_sp[w] = n_sp[w].saturating_add(n_sp[u]);
            }
        }
    }
    present.sort_unstable_by_key(|&u| (std::cmp::Reverse(depth[u]), u));
    Ok(DagVisit {
        root,
        height: h,
        depth,
        n_sp,
        children,
        order: present,
        diam,
    })
}

impl DagVisit {
    pub fn root(&self) -> usize {
        self.root
    }

    /// The height limit the visit was built with.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Largest depth reached, never more than the height limit.
    pub fn diam(&self) -> usize {
        self.diam
    }

    pub fn contains(&self, u: usize) -> bool {
        self.depth.get(u).is_some_and(|&d| d != ABSENT)
    }

    /// Hop distance from the root, `None` for nodes outside the visit.
    pub fn depth(&self, u: usize) -> Option<usize> {
        self.contains(u).then(|| self.depth[u] as usize)
    }

    /// Number of distinct shortest paths from the root (0 outside the visit).
    pub fn n_sp(&self, u: usize) -> u64 {
        self.n_sp.get(u).copied().unwrap_or(0)
    }

    /// DAG successors of `u` in ascending node index.
    pub fn children(&self, u: usize) -> Result<&[usize]> {
        if !self.contains(u) {
            return Err(Error::NodeNotInVisit(u));
        }
        Ok(&self.children[u])
    }

    /// Present nodes, every node before any of its DAG parents
    /// (descending depth, ties by ascending index).
    pub fn reverse_topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn node_count(&self) -> usize {
        self.order.len()
    }

    pub fn dag_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.order
            .iter()
            .rev()
            .flat_map(move |&u| self.children[u].iter().map(move |&w| (u, w)))
    }

    /// Walks the structure and reports the first broken invariant.
    pub fn check_invariants(&self, graph: &Graph) -> Result<(), String> {
        if self.depth(self.root) != Some(0) || self.n_sp(self.root) != 1 {
            return Err("root must have depth 0 and one path".into());
        }
        if self.diam > self.height {
            return Err(format!("diam {} exceeds height {}", self.diam, self.height));
        }
        let mut position = vec![usize::MAX; self.depth.len()];
        for (i, &u) in self.order.iter().enumerate() {
            position[u] = i;
            if self.depth[u] as usize > self.height {
                return Err(format!("node {u} deeper than the height limit"));
            }
        }
        let mut from_parents = vec![0u64; self.depth.len()];
        for (u, w) in self.dag_edges() {
            if !graph.is_adjacent(u, w) {
                return Err(format!("dag edge {u}->{w} is not a graph edge"));
            }
            if self.depth[w] != self.depth[u] + 1 {
                return Err(format!("dag edge {u}->{w} does not descend one level"));
            }
            if position[w] >= position[u] {
                return Err(format!("order places parent {u} before child {w}"));
            }
            from_parents[w] = from_parents[w].saturating_add(self.n_sp[u]);
        }
        for &u in &self.order {
            if u != self.root && from_parents[u] != self.n_sp[u] {
                return Err(format!(
                    "n_sp({u}) = {} but parents sum to {}",
                    self.n_sp[u], from_parents[u]
                ));
            }
        }
        // every graph edge between consecutive levels must be present
        for &(a, b) in graph.edges() {
            for (u, w) in [(a, b), (b, a)] {
                if self.contains(u)
                    && self.contains(w)
                    && self.depth[w] == self.depth[u] + 1
                    && self.children[u].binary_search(&w).is_err()
                {
                    return Err(format!("missing dag edge {u}->{w}"));
                }
            }
        }
        Ok(())
    }

    /// Human-readable dump, one node per line in reverse topological order.
    pub fn dump(&self, graph: &Graph) -> String {
        let mut out = format!(
            "root {} height {} diam {}\n",
            self.root, self.height, self.diam
        );
        for &u in &self.order {
            let _ = writeln!(
                out,
                "{u}\t{}\tdepth={}\tn_sp={}\tchildren={:?}",
                graph.label(u),
                self.depth[u],
                self.n_sp[u],
                self.children[u]
            );
        }
        out
    }
}
