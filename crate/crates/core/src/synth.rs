//! Seeded generators for random test graphs and small fixture datasets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Dataset, Graph, Label};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn alphabet(size: usize) -> Vec<Label> {
    (0..size)
        .map(|i| {
            let symbol = if i < 26 {
                char::from(b'A' + i as u8).to_string()
            } else {
                format!("L{i}")
            };
            Label::new(symbol).expect("generated labels are valid")
        })
        .collect()
}

/// Erdos-Renyi graph with uniformly drawn labels from an alphabet of `labels` symbols.
pub fn random_graph<R: Rng>(rng: &mut R, nodes: usize, edge_probability: f64, labels: usize) -> Graph {
    let sigma = alphabet(labels.max(1));
    let node_labels = (0..nodes).map(|_| sigma[rng.gen_range(0..sigma.len())].clone()).collect();
    let mut edges = Vec::new();
    for i in 0..nodes {
        for j in i + 1..nodes {
            if rng.gen_bool(edge_probability) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(node_labels, edges).expect("generated graphs are valid")
}

/// `count` random graphs with node counts drawn from `min_nodes..=max_nodes`.
pub fn random_graphs<R: Rng>(
    rng: &mut R,
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    edge_probability: f64,
    labels: usize,
) -> Vec<Graph> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(min_nodes..=max_nodes);
            random_graph(rng, n, edge_probability, labels)
        })
        .collect()
}

/// Connected sparse graph resembling a small organic molecule: a random
/// tree of bounded degree with a few ring closures and atom-like labels.
pub fn molecule_like<R: Rng>(rng: &mut R, max_nodes: usize) -> Graph {
    const ATOMS: [(&str, u32); 6] = [("C", 70), ("N", 10), ("O", 12), ("S", 3), ("Cl", 3), ("F", 2)];
    let total: u32 = ATOMS.iter().map(|a| a.1).sum();
    let n = rng.gen_range((max_nodes / 3).max(2)..=max_nodes.max(2));
    let labels = (0..n)
        .map(|_| {
            let mut pick = rng.gen_range(0..total);
            let symbol = ATOMS
                .iter()
                .find(|(_, w)| {
                    if pick < *w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .map(|a| a.0)
                .unwrap_or("C");
            Label::new(symbol).expect("atom symbols are valid")
        })
        .collect();
    let mut degree = vec![0usize; n];
    let mut edges = Vec::new();
    for v in 1..n {
        let candidates: Vec<usize> = (0..v).filter(|&u| degree[u] < 4).collect();
        let u = *candidates.choose(rng).unwrap_or(&(v - 1));
        edges.push((u, v));
        degree[u] += 1;
        degree[v] += 1;
    }
    let rings = rng.gen_range(0..=(n / 6).max(1));
    for _ in 0..rings {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && degree[a] < 4 && degree[b] < 4 && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    Graph::new(labels, edges).expect("generated graphs are valid")
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Two classes with disjoint label alphabets, so every cross-class kernel
/// value of the subtree kernels is zero. Labels alternate `+1, -1, ...`.
pub fn separable_dataset(seed: u64, count: usize) -> Result<Dataset> {
    let mut rng = rng(seed);
    let (pos, neg) = (alphabet(6)[..3].to_vec(), alphabet(6)[3..].to_vec());
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = if i % 2 == 0 { 1 } else { -1 };
        let sigma = if class == 1 { &pos } else { &neg };
        let n = rng.gen_range(4..=9);
        let g = random_graph(&mut rng, n, 0.35, 3);
        let relabeled = g
            .labels()
            .iter()
            .map(|l| sigma[(l.as_str().as_bytes()[0] - b'A') as usize].clone())
            .collect();
        graphs.push(Graph::new(relabeled, g.edges().iter().copied())?);
        labels.push(class);
    }
    Dataset::new("separable", graphs, labels)
}

/// The same graphs with class labels permuted at random.
pub fn shuffled_labels(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let mut labels = dataset.labels().to_vec();
    labels.shuffle(&mut rng(seed));
    dataset.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        let a = random_graphs(&mut rng(3), 5, 4, 10, 0.3, 3);
        let b = random_graphs(&mut rng(3), 5, 4, 10, 0.3, 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|g| (4..=10).contains(&g.node_count())));
    }

    #[test]
    fn molecules_are_connected_and_bounded() {
        let mut r = rng(11);
        for _ in 0..50 {
            let g = molecule_like(&mut r, 30);
            assert!(g.node_count() <= 30);
            assert!((0..g.node_count()).all(|u| g.neighbors(u).len() <= 4));
            let visit = crate::dag::dag_visit(&g, 0, g.node_count()).unwrap();
            assert_eq!(visit.node_count(), g.node_count());
        }
    }

    #[test]
    fn separable_classes_share_no_label() {
        let ds = separable_dataset(1, 20).unwrap();
        for (g, &y) in ds.graphs().iter().zip(ds.labels()) {
            let first = if y == 1 { b'A'..=b'C' } else { b'D'..=b'F' };
            assert!(g.labels().iter().all(|l| first.contains(&l.as_str().as_bytes()[0])));
        }
    }
}
