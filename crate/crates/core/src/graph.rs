//! Undirected node-labeled graphs and labeled datasets.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Symbols used by the feature encodings; they may not appear in labels.
pub const RESERVED_SYMBOLS: [char; 4] = ['⌈', '⌋', '#', '∘'];

/// A node label drawn from a finite alphabet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(symbol: impl Into<String>) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() {
            return Err(Error::InvalidLabel {
                label: symbol,
                reason: "empty label",
            });
        }
        if symbol.contains(RESERVED_SYMBOLS) {
            return Err(Error::InvalidLabel {
                label: symbol,
                reason: "contains a reserved encoding symbol",
            });
        }
        Ok(Label(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Label::new(raw).map_err(serde::de::Error::custom)
    }
}

/// First structural invariant a graph violates.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("edge ({0}, {1}) references a node outside 0..{len}", edge.0, edge.1)]
    NodeIndex { edge: (usize, usize), len: usize },
    #[error("adjacency of nodes {0} and {1} is not symmetric", pair.0, pair.1)]
    Asymmetric { pair: (usize, usize) },
    #[error("edge ({0}, {1}) is stored more than once", edge.0, edge.1)]
    DuplicateEdge { edge: (usize, usize) },
}

/// Checks a raw edge list against a node count.
pub fn validate_structure(node_count: usize, edges: &[(usize, usize)]) -> Result<(), Violation> {
    for &(a, b) in edges {
        if a >= node_count || b >= node_count {
            return Err(Violation::NodeIndex {
                edge: (a, b),
                len: node_count,
            });
        }
        if a == b {
            return Err(Violation::SelfLoop { node: a });
        }
    }
    Ok(())
}

/// Re-checks every invariant of an already built graph.
pub fn validate(graph: &Graph) -> Result<(), Violation> {
    let n = graph.node_count();
    validate_structure(n, &graph.edges)?;
    for pair in graph.edges.windows(2) {
        if pair[0] == pair[1] {
            return Err(Violation::DuplicateEdge { edge: pair[0] });
        }
    }
    for (u, neighbors) in graph.adjacency.iter().enumerate() {
        for &w in neighbors {
            if w >= n {
                return Err(Violation::NodeIndex { edge: (u, w), len: n });
            }
            if u == w {
                return Err(Violation::SelfLoop { node: u });
            }
            if graph.adjacency[w].binary_search(&u).is_err() {
                return Err(Violation::Asymmetric { pair: (u, w) });
            }
        }
    }
    Ok(())
}

/// Undirected graph with dense node indices and one label per node.
///
/// Edges are stored once as `(min, max)` pairs in ascending order; adjacency
/// lists are sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<Label>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, collapsing duplicate (and reversed) edges.
    pub fn new(labels: Vec<Label>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        validate_structure(labels.len(), &edges)?;
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); labels.len()];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            labels,
            edges,
            adjacency,
        })
    }

    /// Convenience constructor from string labels.
    pub fn from_symbols<S: AsRef<str>>(
        symbols: &[S],
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let labels = symbols
            .iter()
            .map(|s| Label::new(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Graph::new(labels, edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &Label {
        &self.labels[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Returns an isomorphic copy where old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter(format!(
                "not a permutation of 0..{n}"
            )));
        }
        let mut labels = vec![None; n];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = Some(self.labels[old].clone());
        }
        let labels = labels.into_iter().map(Option::unwrap).collect();
        Graph::new(labels, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }
}

/// A binary classification dataset of graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    graphs: Vec<Graph>,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, labels: Vec<i8>) -> Result<Self> {
        if graphs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} graphs but {} class labels",
                graphs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidParameter(format!(
                "class label {bad} is not -1 or +1"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            graphs,
            labels,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Distinct node labels in first-appearance order.
    pub fn alphabet(&self) -> Vec<&Label> {
        let mut seen = std::collections::HashSet::new();
        self.graphs
            .iter()
            .flat_map(|g| g.labels())
            .filter(|l| seen.insert(*l))
            .collect()
    }

    /// Same graphs with class labels replaced.
    pub fn with_labels(&self, labels: Vec<i8>) -> Result<Self> {
        Dataset::new(self.name.clone(), self.graphs.clone(), labels)
    }
}
