//! Hash-map feature representation with root and total frequencies and
//! per-feature context sets, and the pairwise kernel evaluated over it.
//!
//! This path is written independently of [`crate::features`] so the two can
//! be compared against each other.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dag::dag_visit;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::interner::FeatureInterner;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureRecord {
    /// Occurrences as the whole feature of a visit root.
    pub freq_root: u64,
    /// Occurrences weighted by the number of shortest paths to the node.
    pub freq_tot: u64,
    /// Context feature id -> number of children of the context equal to this feature.
    pub contexts: BTreeMap<u32, u32>,
    pub size: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImplicitFeatureSpace {
    interner: u64,
    h: usize,
    records: BTreeMap<u32, FeatureRecord>,
}

impl ImplicitFeatureSpace {
    pub fn records(&self) -> &BTreeMap<u32, FeatureRecord> {
        &self.records
    }

    pub fn get(&self, feature: u32) -> Option<&FeatureRecord> {
        self.records.get(&feature)
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn interner_uid(&self) -> u64 {
        self.interner
    }

    /// Checks the structural invariants of the records.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (f, rec) in &self.records {
            if rec.freq_root > rec.freq_tot {
                return Err(format!("feature {f}: freq_root > freq_tot"));
            }
            for (c, &m) in &rec.contexts {
                if m == 0 {
                    return Err(format!("feature {f}: zero multiplicity in context {c}"));
                }
                if !self.records.contains_key(c) {
                    return Err(format!("feature {f}: context {c} has no record"));
                }
            }
        }
        Ok(())
    }

    /// Rewrites ids through `remap` and rebinds to the interner `uid`.
    pub fn remapped(&self, remap: &[u32], uid: u64) -> Self {
        let records = self
            .records
            .iter()
            .map(|(&f, rec)| {
                let contexts = rec
                    .contexts
                    .iter()
                    .map(|(&c, &m)| (remap[c as usize], m))
                    .collect();
                (
                    remap[f as usize],
                    FeatureRecord {
                        contexts,
                        ..rec.clone()
                    },
                )
            })
            .collect();
        ImplicitFeatureSpace {
            interner: uid,
            h: self.h,
            records,
        }
    }
}

/// Decomposes `graph` into its implicit feature space with visit height `h`.
pub fn decompose_implicit(
    graph: &Graph,
    h: usize,
    interner: &mut FeatureInterner,
) -> ImplicitFeatureSpace {
    let n = graph.node_count();
    let labels: Vec<u32> = graph.labels().iter().map(|l| interner.intern_label(l)).collect();
    let mut records: BTreeMap<u32, FeatureRecord> = BTreeMap::new();
    let mut keys: Vec<u32> = Vec::new();
    let mut sizes: Vec<u64> = Vec::new();
    let mut sorted = Vec::new();

    for v in 0..n {
        let visit = dag_visit(graph, v, h).expect("root in range");
        let diam = visit.diam();
        let width = diam + 1;
        keys.clear();
        keys.resize(n * width, u32::MAX);
        sizes.clear();
        sizes.resize(n * width, 0);
        for &u in visit.reverse_topological_order() {
            let children = visit.children(u).expect("visited");
            let depth = visit.depth(u).expect("visited");
            for d in 0..=(diam - depth) {
                let (key, size) = if d == 0 || children.is_empty() {
                    (labels[u], 1)
                } else {
                    sorted.clear();
                    sorted.extend(children.iter().map(|&c| keys[c * width + d - 1]));
                    sorted.sort_unstable();
                    let size = children
                        .iter()
                        .fold(1u64, |acc, &c| acc.saturating_add(sizes[c * width + d - 1]));
                    let key = interner.intern_tree(labels[u], &sorted, size);
                    for &c in children {
                        let child = keys[c * width + d - 1];
                        let multiplicity = sorted.iter().filter(|&&s| s == child).count() as u32;
                        records
                            .get_mut(&child)
                            .expect("children are recorded before their parents")
                            .contexts
                            .insert(key, multiplicity);
                    }
                    (key, size)
                };
                keys[u * width + d] = key;
                sizes[u * width + d] = size;
                let record = records.entry(key).or_insert_with(|| FeatureRecord {
                    size,
                    ..FeatureRecord::default()
                });
                if u == v {
                    record.freq_root += 1;
                }
                record.freq_tot = record.freq_tot.saturating_add(visit.n_sp(u));
            }
        }
    }
    ImplicitFeatureSpace {
        interner: interner.uid(),
        h,
        records,
    }
}

/// Parallel decomposition followed by an in-order merge of the per-graph
/// interners (see [`crate::features::extract_all`]).
pub fn decompose_all(graphs: &[Graph], h: usize) -> (Vec<ImplicitFeatureSpace>, FeatureInterner) {
    let local: Vec<(ImplicitFeatureSpace, FeatureInterner)> = graphs
        .par_iter()
        .map(|g| {
            let mut interner = FeatureInterner::new();
            let space = decompose_implicit(g, h, &mut interner);
            (space, interner)
        })
        .collect();
    let mut global = FeatureInterner::new();
    let uid = global.uid();
    let spaces = local
        .iter()
        .map(|(space, interner)| space.remapped(&global.absorb(interner), uid))
        .collect();
    (spaces, global)
}

/// Kernel between two implicit feature spaces built with the same interner
/// and height.
pub fn kernel_implicit<T: Scalar>(
    a: &ImplicitFeatureSpace,
    b: &ImplicitFeatureSpace,
    lambda: T,
) -> Result<T> {
    if a.interner != b.interner || a.h != b.h {
        return Err(Error::InternerMismatch);
    }
    let mut score = T::zero();
    let mut left = a.records.iter().peekable();
    let mut right = b.records.iter().peekable();
    while let (Some(&(fa, ra)), Some(&(fb, rb))) = (left.peek(), right.peek()) {
        if fa < fb {
            left.next();
            continue;
        }
        if fb < fa {
            right.next();
            continue;
        }
        let weight = lambda.powf(T::of_u64(ra.size));
        score += T::of_u64(ra.freq_root) * T::of_u64(rb.freq_root) * weight;
        for (c, &m) in &ra.contexts {
            if let Some(&m_b) = rb.contexts.get(c) {
                debug_assert_eq!(m, m_b, "multiplicity is a property of the context");
                let ca = a.records[c].freq_tot;
                let cb = b.records[c].freq_tot;
                let m = T::of_u64(u64::from(m));
                score += T::of_u64(ca) * T::of_u64(cb) * (m * m) * weight;
            }
        }
        left.next();
        right.next();
    }
    Ok(score)
}
