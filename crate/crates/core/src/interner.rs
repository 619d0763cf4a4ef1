//! Collision-free interning of subtree and contexted-feature encodings.
//!
//! Every feature is identified by a structural key whose string rendering is
//! the canonical encoding: a leaf renders as its label, a subtree as
//! `L⌈S1#S2#…⌋` with child ids sorted ascending, and a contexted feature as
//! `f∘c` (or `f∘∅` for the empty context).

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graph::Label;

const LEAF: u32 = 0;
const TREE: u32 = 1;
const CONTEXT: u32 = 2;
const WL_REFINE: u32 = 3;
const WL_ITERATION: u32 = 4;
const EMPTY_CONTEXT: u32 = u32::MAX;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

/// An interned subtree feature together with its node count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureKey {
    pub id: u32,
    pub size: u64,
}

/// Bijection between encodings and dense ids, assigned in insertion order.
#[derive(Clone, Debug)]
pub struct FeatureInterner {
    uid: u64,
    keys: Vec<Box<[u32]>>,
    sizes: Vec<u64>,
    lookup: FxHashMap<Box<[u32]>, u32>,
    label_text: Vec<String>,
    label_index: FxHashMap<String, u32>,
    scratch: Vec<u32>,
}

impl Default for FeatureInterner {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureInterner {
    pub fn new() -> Self {
        FeatureInterner {
            uid: NEXT_UID.fetch_add(1, Ordering::Relaxed),
            keys: Vec::new(),
            sizes: Vec::new(),
            lookup: FxHashMap::default(),
            label_text: Vec::new(),
            label_index: FxHashMap::default(),
            scratch: Vec::new(),
        }
    }

    /// Identity of this table; implicit feature spaces record it.
    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn intern_scratch(&mut self, size: u64) -> u32 {
        if let Some(&id) = self.lookup.get(self.scratch.as_slice()) {
            return id;
        }
        let id = u32::try_from(self.keys.len()).expect("more than u32::MAX features");
        let key: Box<[u32]> = self.scratch.as_slice().into();
        self.keys.push(key.clone());
        self.sizes.push(size);
        self.lookup.insert(key, id);
        id
    }

    /// Id of the single-node feature carrying `label`.
    pub fn intern_label(&mut self, label: &Label) -> u32 {
        let index = match self.label_index.get(label.as_str()) {
            Some(&i) => i,
            None => {
                let i = self.label_text.len() as u32;
                self.label_text.push(label.as_str().to_owned());
                self.label_index.insert(label.as_str().to_owned(), i);
                i
            }
        };
        self.scratch.clear();
        self.scratch.extend([LEAF, index]);
        self.intern_scratch(1)
    }

    /// Id of the subtree with root label feature `root` and the given children.
    ///
    /// `children` must already be sorted ascending. `size` is the node count.
    pub fn intern_tree(&mut self, root: u32, children: &[u32], size: u64) -> u32 {
        debug_assert!(children.windows(2).all(|w| w[0] <= w[1]));
        self.scratch.clear();
        self.scratch.extend([TREE, root]);
        self.scratch.extend_from_slice(children);
        self.intern_scratch(size)
    }

    /// Id of feature `feature` seen within `context` (`None` = empty context).
    pub fn intern_context(&mut self, feature: u32, context: Option<u32>) -> u32 {
        self.scratch.clear();
        self.scratch
            .extend([CONTEXT, feature, context.unwrap_or(EMPTY_CONTEXT)]);
        self.intern_scratch(0)
    }

    /// Compressed label after one neighborhood refinement step.
    pub fn intern_wl_refined(&mut self, previous: u32, neighbors: &[u32]) -> u32 {
        debug_assert!(neighbors.windows(2).all(|w| w[0] <= w[1]));
        self.scratch.clear();
        self.scratch.extend([WL_REFINE, previous]);
        self.scratch.extend_from_slice(neighbors);
        self.intern_scratch(0)
    }

    /// Iteration-tagged refinement feature.
    pub fn intern_wl_iteration(&mut self, iteration: u32, label: u32) -> u32 {
        self.scratch.clear();
        self.scratch.extend([WL_ITERATION, iteration, label]);
        self.intern_scratch(0)
    }

    /// Node count of a subtree feature (1 for leaves, 0 for non-tree ids).
    pub fn size(&self, id: u32) -> u64 {
        self.sizes[id as usize]
    }

    pub fn key(&self, id: u32) -> FeatureKey {
        FeatureKey {
            id,
            size: self.size(id),
        }
    }

    /// True for plain (non-contexted) subtree features.
    pub fn is_subtree(&self, id: u32) -> bool {
        matches!(self.keys[id as usize][0], LEAF | TREE)
    }

    /// For a contexted id, the `(feature, context)` pair it encodes.
    pub fn context_parts(&self, id: u32) -> Option<(u32, Option<u32>)> {
        match &*self.keys[id as usize] {
            [CONTEXT, f, c] => Some((*f, (*c != EMPTY_CONTEXT).then_some(*c))),
            _ => None,
        }
    }

    /// For a subtree id, the sorted ids of its children (empty for leaves).
    pub fn tree_children(&self, id: u32) -> Option<&[u32]> {
        match &*self.keys[id as usize] {
            [LEAF, _] => Some(&[]),
            [TREE, _, children @ ..] => Some(children),
            _ => None,
        }
    }

    /// The canonical encoding string of `id`.
    pub fn encoding(&self, id: u32) -> String {
        let mut out = String::new();
        self.render(id, &mut out);
        out
    }

    fn render(&self, id: u32, out: &mut String) {
        match &*self.keys[id as usize] {
            [LEAF, label] => out.push_str(&self.label_text[*label as usize]),
            [TREE, root, children @ ..] => {
                self.render(*root, out);
                push_id_list(out, children);
            }
            [CONTEXT, f, c] => {
                let _ = write!(out, "{f}∘");
                if *c == EMPTY_CONTEXT {
                    out.push('∅');
                } else {
                    let _ = write!(out, "{c}");
                }
            }
            [WL_REFINE, previous, neighbors @ ..] => {
                let _ = write!(out, "#{previous}");
                push_id_list(out, neighbors);
            }
            [WL_ITERATION, iteration, label] => {
                let _ = write!(out, "{iteration}#{label}");
            }
            other => unreachable!("malformed key {other:?}"),
        }
    }

    /// Fully expanded form of a subtree feature, with children ordered by
    /// their own expanded strings. Independent of id assignment, so it can
    /// compare features across interners.
    pub fn canonical_string(&self, id: u32) -> String {
        match &*self.keys[id as usize] {
            [LEAF, label] => self.label_text[*label as usize].clone(),
            [TREE, root, children @ ..] => {
                let mut parts: Vec<String> =
                    children.iter().map(|&c| self.canonical_string(c)).collect();
                parts.sort();
                format!("{}⌈{}⌋", self.canonical_string(*root), parts.join("#"))
            }
            [CONTEXT, f, c] => {
                let context = if *c == EMPTY_CONTEXT {
                    "∅".to_owned()
                } else {
                    self.canonical_string(*c)
                };
                format!("{}∘{}", self.canonical_string(*f), context)
            }
            [WL_REFINE, previous, neighbors @ ..] => {
                let mut parts: Vec<String> =
                    neighbors.iter().map(|&c| self.canonical_string(c)).collect();
                parts.sort();
                format!("#{}⌈{}⌋", self.canonical_string(*previous), parts.join("#"))
            }
            [WL_ITERATION, iteration, label] => {
                format!("{iteration}#{}", self.canonical_string(*label))
            }
            other => unreachable!("malformed key {other:?}"),
        }
    }

    /// Interns every entry of `other` in its insertion order and returns the
    /// map from `other`'s ids to ids in `self`.
    ///
    /// Absorbing per-graph tables in dataset order assigns exactly the ids a
    /// single shared table would have assigned sequentially.
    pub fn absorb(&mut self, other: &FeatureInterner) -> Vec<u32> {
        let mut remap: Vec<u32> = Vec::with_capacity(other.keys.len());
        for (key, &size) in other.keys.iter().zip(&other.sizes) {
            let id = match &**key {
                [LEAF, label] => {
                    let label = Label::new(other.label_text[*label as usize].clone())
                        .expect("interned labels are valid");
                    self.intern_label(&label)
                }
                [tag @ (TREE | WL_REFINE), head, rest @ ..] => {
                    let mut mapped: Vec<u32> = rest.iter().map(|&c| remap[c as usize]).collect();
                    mapped.sort_unstable();
                    let head = remap[*head as usize];
                    if *tag == TREE {
                        self.intern_tree(head, &mapped, size)
                    } else {
                        self.intern_wl_refined(head, &mapped)
                    }
                }
                [CONTEXT, f, c] => {
                    let context = (*c != EMPTY_CONTEXT).then(|| remap[*c as usize]);
                    self.intern_context(remap[*f as usize], context)
                }
                [WL_ITERATION, iteration, label] => {
                    self.intern_wl_iteration(*iteration, remap[*label as usize])
                }
                other => unreachable!("malformed key {other:?}"),
            };
            remap.push(id);
        }
        remap
    }
}

fn push_id_list(out: &mut String, ids: &[u32]) {
    out.push('⌈');
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push('#');
        }
        let _ = write!(out, "{id}");
    }
    out.push('⌋');
}

/// Encoding of a single-node subtree.
pub fn encode_leaf(symbol: &str) -> Result<String> {
    Ok(Label::new(symbol)?.as_str().to_owned())
}

/// Encoding of a subtree given its root label and its children's ids,
/// which are sorted numerically.
pub fn encode_composite(symbol: &str, child_ids: &[u32]) -> Result<String> {
    let label = Label::new(symbol)?;
    if child_ids.is_empty() {
        return Err(Error::InvalidParameter(
            "a composite subtree needs at least one child".into(),
        ));
    }
    let mut sorted = child_ids.to_vec();
    sorted.sort_unstable();
    let mut out = label.as_str().to_owned();
    push_id_list(&mut out, &sorted);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> Label {
        Label::new(s).unwrap()
    }

    #[test]
    fn leaf_and_composite_strings() {
        assert_eq!(encode_leaf("C").unwrap(), "C");
        assert_eq!(encode_leaf("Br").unwrap(), "Br");
        assert!(encode_leaf("a#b").is_err());
        assert_eq!(encode_composite("C", &[5, 3]).unwrap(), "C⌈3#5⌋");
        assert_eq!(encode_composite("N", &[7]).unwrap(), "N⌈7⌋");
        assert!(encode_composite("N", &[]).is_err());
    }

    #[test]
    fn ids_dense_and_stable() {
        let mut it = FeatureInterner::new();
        let c = it.intern_label(&label("C"));
        let n = it.intern_label(&label("N"));
        assert_eq!((c, n), (0, 1));
        assert_eq!(it.intern_label(&label("C")), 0);
        let t = it.intern_tree(c, &[0, 1], 3);
        assert_eq!(t, 2);
        assert_eq!(it.intern_tree(c, &[0, 1], 3), 2);
        assert_eq!(it.encoding(t), "C⌈0#1⌋");
        assert_eq!(it.encoding(t), encode_composite("C", &[1, 0]).unwrap());
        assert_eq!(it.size(t), 3);
        let ctx = it.intern_context(n, Some(t));
        let root = it.intern_context(t, None);
        assert_eq!(it.encoding(ctx), "1∘2");
        assert_eq!(it.encoding(root), "2∘∅");
        assert_eq!(it.context_parts(root), Some((t, None)));
        assert!(it.is_subtree(t) && !it.is_subtree(ctx));
        assert_eq!(it.len(), 5);
    }

    #[test]
    fn numeric_labels_do_not_collide_with_refinements() {
        let mut it = FeatureInterner::new();
        let five = it.intern_label(&label("5"));
        let tree = it.intern_tree(five, &[five], 2);
        let refined = it.intern_wl_refined(five, &[five]);
        assert_ne!(tree, refined);
        assert_ne!(it.encoding(tree), it.encoding(refined));
        let tagged = it.intern_wl_iteration(0, five);
        assert_eq!(it.encoding(tagged), "0#0");
    }

    #[test]
    fn absorb_reproduces_sequential_ids() {
        let mut shared = FeatureInterner::new();
        let mut first = FeatureInterner::new();
        let mut second = FeatureInterner::new();
        for it in [&mut shared, &mut first] {
            let a = it.intern_label(&label("A"));
            let b = it.intern_label(&label("B"));
            it.intern_tree(a, &[b], 2);
        }
        for it in [&mut shared, &mut second] {
            let b = it.intern_label(&label("B"));
            let c = it.intern_label(&label("C"));
            let a = it.intern_label(&label("A"));
            let t = it.intern_tree(a, &[b], 2);
            let mut ch = [c, t];
            ch.sort();
            it.intern_tree(b, &ch, 4);
        }
        let mut merged = FeatureInterner::new();
        merged.absorb(&first);
        let remap = merged.absorb(&second);
        assert_eq!(merged.len(), shared.len());
        for id in 0..shared.len() as u32 {
            assert_eq!(merged.encoding(id), shared.encoding(id));
        }
        for (local, &global) in remap.iter().enumerate() {
            assert_eq!(
                second.canonical_string(local as u32),
                merged.canonical_string(global)
            );
        }
    }

    #[test]
    fn canonical_string_ignores_id_order() {
        let mut x = FeatureInterner::new();
        let mut y = FeatureInterner::new();
        let (xa, xb) = (x.intern_label(&label("A")), x.intern_label(&label("B")));
        let (yb, ya) = (y.intern_label(&label("B")), y.intern_label(&label("A")));
        let tx = x.intern_tree(xa, &[xa, xb], 3);
        let ty = y.intern_tree(ya, &[yb, ya], 3);
        assert_ne!(xa, ya);
        assert_eq!(x.canonical_string(tx), "A⌈A#B⌋");
        assert_eq!(x.canonical_string(tx), y.canonical_string(ty));
    }
}
