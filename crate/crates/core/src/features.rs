//! Explicit sparse feature maps: contexted subtree features (TCK), plain
//! subtree features (ODD), their union, and Weisfeiler-Lehman subtree counts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dag::dag_visit;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::interner::FeatureInterner;
use crate::scalar::Scalar;

/// Which feature space a vector lives in; also names the kernel family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpaceTag {
    #[serde(rename = "TCK")]
    Tck,
    #[serde(rename = "ODD")]
    Odd,
    #[serde(rename = "TCK+ODD")]
    TckOdd,
    #[serde(rename = "WL")]
    Wl,
}

pub type KernelFamily = SpaceTag;

impl SpaceTag {
    pub const ALL: [SpaceTag; 4] = [SpaceTag::Tck, SpaceTag::Odd, SpaceTag::TckOdd, SpaceTag::Wl];

    /// Whether the family's weights depend on the subtree weight factor.
    pub fn uses_lambda(self) -> bool {
        !matches!(self, SpaceTag::Wl)
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceTag::Tck => "TCK",
            SpaceTag::Odd => "ODD",
            SpaceTag::TckOdd => "TCK+ODD",
            SpaceTag::Wl => "WL",
        })
    }
}

impl FromStr for SpaceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tck" => Ok(SpaceTag::Tck),
            "odd" | "oddk" => Ok(SpaceTag::Odd),
            "tck+odd" | "tck+oddk" | "tckodd" => Ok(SpaceTag::TckOdd),
            "wl" | "fs" => Ok(SpaceTag::Wl),
            _ => Err(Error::InvalidParameter(format!("unknown kernel family {s:?}"))),
        }
    }
}

/// Visit height and subtree weight factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    pub h: usize,
    pub lambda: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(h: usize, lambda: T) -> Result<Self> {
        if h < 1 {
            return Err(Error::InvalidParameter(format!("height must be >= 1, got {h}")));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(KernelParams { h, lambda })
    }
}

/// Sparse vector of strictly positive weights keyed by interned id,
/// stored in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureVector<T> {
    entries: Vec<(u32, T)>,
    space: SpaceTag,
}

impl<T: Scalar> SparseFeatureVector<T> {
    pub fn from_map(map: FxHashMap<u32, T>, space: SpaceTag) -> Self {
        Self::from_entries(map.into_iter().collect(), space)
    }

    /// Builds a vector from unsorted entries; ids must be distinct.
    pub fn from_entries(mut entries: Vec<(u32, T)>, space: SpaceTag) -> Self {
        entries.retain(|&(_, w)| w > T::zero());
        entries.sort_unstable_by_key(|&(id, _)| id);
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        SparseFeatureVector { entries, space }
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn entries(&self) -> &[(u32, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> T {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|i| self.entries[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Inner product over shared ids, summed in ascending id order.
    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                left: self.space,
                right: other.space,
            });
        }
        Ok(sorted_dot(&self.entries, &other.entries))
    }

    pub fn squared_norm(&self) -> T {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    /// Rewrites ids through `remap` (old id -> new id).
    pub fn remapped(&self, remap: &[u32]) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(id, w)| (remap[id as usize], w))
            .collect();
        Self::from_entries(entries, self.space)
    }

    /// `(encoding, weight)` pairs sorted by encoding string.
    pub fn encoded(&self, interner: &FeatureInterner) -> Vec<(String, T)> {
        let mut out: Vec<(String, T)> = self
            .entries
            .iter()
            .map(|&(id, w)| (interner.encoding(id), w))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

pub(crate) fn sorted_dot<T: Scalar>(a: &[(u32, T)], b: &[(u32, T)]) -> T {
    let (mut i, mut j) = (0, 0);
    let mut acc = T::zero();
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Memoized `lambda^(size/2)`.
struct HalfPowers<T> {
    root: T,
    cache: Vec<T>,
}

impl<T: Scalar> HalfPowers<T> {
    const CACHED: usize = 4096;

    fn new(lambda: T) -> Self {
        let root = lambda.sqrt();
        let mut cache = Vec::with_capacity(64);
        cache.push(T::one());
        HalfPowers { root, cache }
    }

    fn get(&mut self, size: u64) -> T {
        let s = size as usize;
        if s >= Self::CACHED {
            return self.root.powf(T::of_u64(size));
        }
        while self.cache.len() <= s {
            let next = *self.cache.last().unwrap() * self.root;
            self.cache.push(next);
        }
        self.cache[s]
    }
}

fn bump<T: Scalar>(phi: &mut FxHashMap<u32, T>, id: u32, amount: T) {
    // underflowed increments would leave zero entries behind
    if amount > T::zero() {
        *phi.entry(id).or_insert_with(T::zero) += amount;
    }
}

/// Shared walk over every DAG-visit; `contexts` emits `f∘c` entries,
/// `plain` emits non-contexted subtree entries.
fn subtree_walk<T: Scalar>(
    graph: &Graph,
    params: &KernelParams<T>,
    interner: &mut FeatureInterner,
    contexts: bool,
    plain: bool,
) -> FxHashMap<u32, T> {
    let mut phi = FxHashMap::default();
    let labels: Vec<u32> = graph.labels().iter().map(|l| interner.intern_label(l)).collect();
    let mut powers = HalfPowers::new(params.lambda);
    let n = graph.node_count();
    let mut feature: Vec<u32> = Vec::new();
    let mut size: Vec<u64> = Vec::new();
    let mut child_ids: Vec<u32> = Vec::new();

    for v in 0..n {
        let visit = dag_visit(graph, v, params.h).expect("root in range");
        let diam = visit.diam();
        let stride = diam + 1;
        feature.clear();
        feature.resize(n * stride, u32::MAX);
        size.clear();
        size.resize(n * stride, 0);

        for &u in visit.reverse_topological_order() {
            let depth = visit.depth(u).expect("visited");
            let paths = T::of_u64(visit.n_sp(u));
            let children = visit.children(u).expect("visited");
            for d in 0..=(diam - depth) {
                let slot = u * stride + d;
                if d == 0 || children.is_empty() {
                    // a leaf keeps its single-node feature at every height
                    feature[slot] = labels[u];
                    size[slot] = 1;
                } else {
                    child_ids.clear();
                    child_ids.extend(children.iter().map(|&c| feature[c * stride + d - 1]));
                    child_ids.sort_unstable();
                    let total = children
                        .iter()
                        .fold(1u64, |acc, &c| acc.saturating_add(size[c * stride + d - 1]));
                    let id = interner.intern_tree(labels[u], &child_ids, total);
                    feature[slot] = id;
                    size[slot] = total;
                    if contexts {
                        for &c in children {
                            let child_slot = c * stride + d - 1;
                            let ctx = interner.intern_context(feature[child_slot], Some(id));
                            bump(&mut phi, ctx, paths * powers.get(size[child_slot]));
                        }
                    }
                }
                if plain {
                    bump(&mut phi, feature[slot], paths * powers.get(size[slot]));
                }
                if contexts && u == v {
                    let ctx = interner.intern_context(feature[slot], None);
                    bump(&mut phi, ctx, powers.get(size[slot]));
                }
            }
        }
    }
    phi
}

/// Contexted subtree features: every subtree paired with the subtree
/// generated by its parent, or with the empty context at a visit root.
pub fn tck_features<T: Scalar>(
    graph: &Graph,
    params: &KernelParams<T>,
    interner: &mut FeatureInterner,
) -> SparseFeatureVector<T> {
    SparseFeatureVector::from_map(subtree_walk(graph, params, interner, true, false), SpaceTag::Tck)
}

/// Plain subtree features over the same visits and height ranges.
pub fn odd_features<T: Scalar>(
    graph: &Graph,
    params: &KernelParams<T>,
    interner: &mut FeatureInterner,
) -> SparseFeatureVector<T> {
    SparseFeatureVector::from_map(subtree_walk(graph, params, interner, false, true), SpaceTag::Odd)
}

/// Union of the contexted and plain features; ids never collide.
pub fn tck_plus_odd_features<T: Scalar>(
    graph: &Graph,
    params: &KernelParams<T>,
    interner: &mut FeatureInterner,
) -> SparseFeatureVector<T> {
    SparseFeatureVector::from_map(subtree_walk(graph, params, interner, true, true), SpaceTag::TckOdd)
}

/// Weisfeiler-Lehman subtree counts for refinement iterations `0..=h`.
pub fn wl_features<T: Scalar>(
    graph: &Graph,
    h: usize,
    interner: &mut FeatureInterner,
) -> SparseFeatureVector<T> {
    let mut phi = FxHashMap::default();
    let mut current: Vec<u32> = graph.labels().iter().map(|l| interner.intern_label(l)).collect();
    let mut neighbor_ids = Vec::new();
    for iteration in 0..=h {
        if iteration > 0 {
            current = (0..graph.node_count())
                .map(|u| {
                    neighbor_ids.clear();
                    neighbor_ids.extend(graph.neighbors(u).iter().map(|&w| current[w]));
                    neighbor_ids.sort_unstable();
                    interner.intern_wl_refined(current[u], &neighbor_ids)
                })
                .collect();
        }
        for &label in &current {
            let id = interner.intern_wl_iteration(iteration as u32, label);
            *phi.entry(id).or_insert_with(T::zero) += T::one();
        }
    }
    SparseFeatureVector::from_map(phi, SpaceTag::Wl)
}

/// Dispatches on the kernel family.
pub fn extract<T: Scalar>(
    graph: &Graph,
    family: SpaceTag,
    params: &KernelParams<T>,
    interner: &mut FeatureInterner,
) -> SparseFeatureVector<T> {
    match family {
        SpaceTag::Tck => tck_features(graph, params, interner),
        SpaceTag::Odd => odd_features(graph, params, interner),
        SpaceTag::TckOdd => tck_plus_odd_features(graph, params, interner),
        SpaceTag::Wl => wl_features(graph, params.h, interner),
    }
}

/// Extracts every graph in parallel with per-graph tables, then merges the
/// tables in input order. Ids and weights are identical to a sequential run
/// with one shared interner, whatever the number of worker threads.
pub fn extract_all<T: Scalar>(
    graphs: &[Graph],
    family: SpaceTag,
    params: &KernelParams<T>,
) -> (Vec<SparseFeatureVector<T>>, FeatureInterner) {
    let local: Vec<(SparseFeatureVector<T>, FeatureInterner)> = graphs
        .par_iter()
        .map(|g| {
            let mut interner = FeatureInterner::new();
            let phi = extract(g, family, params, &mut interner);
            (phi, interner)
        })
        .collect();
    let mut global = FeatureInterner::new();
    let vectors = local
        .iter()
        .map(|(phi, interner)| phi.remapped(&global.absorb(interner)))
        .collect();
    (vectors, global)
}

#[derive(Serialize)]
struct FeatureRecord<'a> {
    graph: usize,
    space: SpaceTag,
    features: &'a [(String, f64)],
}

/// JSON lines, one `{"graph", "space", "features"}` record per vector.
pub fn write_feature_jsonl<T: Scalar, W: Write>(
    vectors: &[SparseFeatureVector<T>],
    interner: &FeatureInterner,
    mut out: W,
) -> Result<()> {
    for (graph, phi) in vectors.iter().enumerate() {
        let features: Vec<(String, f64)> = phi
            .encoded(interner)
            .into_iter()
            .map(|(s, w)| (s, w.to_f64_lossy()))
            .collect();
        serde_json::to_writer(
            &mut out,
            &FeatureRecord {
                graph,
                space: phi.space(),
                features: &features,
            },
        )?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}
