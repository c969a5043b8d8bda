//! Defective family trees with Ulam-Harris labels.
//!
//! A tree is stored as a map from node label to child count. The count of a
//! node is a number `c(i)`, the graveyard marker `Δ` (the defective element
//! `iΔ`), or unknown when the node was never expanded (depth caps, and the
//! generation that follows a `Δ`). The label-set view is rebuilt on demand
//! to check the defining properties.

mod enumerate;
mod prop4;
mod sample;
mod spine;

pub use enumerate::{enumerate_conditioned, ConditionedLaw, ENUMERATION_BUDGET};
pub use prop4::{validate_prop4, Prop4Report};
pub use sample::{rejection_conditioned, sample_dbtve, NODE_BUDGET};
pub use spine::{sample_conditioned, spine_dist, ConditionedSampler, SpineDist, SpineRecord};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::{Environment, Error, Result, State};

pub type Label = Vec<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChildCount {
    Count(u32),
    Delta,
}

/// A finite defective family tree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DefectiveTree {
    nodes: BTreeMap<Label, Option<ChildCount>>,
}

/// Letters of the label-set view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Letter {
    Num(u32),
    Delta,
}

impl DefectiveTree {
    /// A single unexpanded root.
    pub fn root_only() -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(Vec::new(), None);
        DefectiveTree { nodes }
    }

    /// Build from `(label, child count)` pairs and validate.
    pub fn from_nodes(nodes: impl IntoIterator<Item = (Label, Option<ChildCount>)>) -> Result<Self> {
        let tree = DefectiveTree { nodes: nodes.into_iter().collect() };
        tree.validate()?;
        Ok(tree)
    }

    pub(crate) fn from_map_unchecked(nodes: BTreeMap<Label, Option<ChildCount>>) -> Self {
        DefectiveTree { nodes }
    }

    pub fn nodes(&self) -> &BTreeMap<Label, Option<ChildCount>> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn child_count(&self, label: &[u32]) -> Option<Option<ChildCount>> {
        self.nodes.get(label).copied()
    }

    /// Nodes in breadth-first order: by generation, then lexicographically.
    pub fn bfs(&self) -> Vec<(&Label, Option<ChildCount>)> {
        let mut v: Vec<_> = self.nodes.iter().map(|(l, c)| (l, *c)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(b.0)));
        v
    }

    fn label_set(&self) -> BTreeSet<Vec<Letter>> {
        let mut set = BTreeSet::new();
        for (label, count) in &self.nodes {
            let word: Vec<Letter> = label.iter().map(|&j| Letter::Num(j)).collect();
            if let Some(ChildCount::Delta) = count {
                let mut d = word.clone();
                d.push(Letter::Delta);
                set.insert(d);
            }
            set.insert(word);
        }
        set
    }

    /// Check properties (i)–(v) on the label-set view and that the stored
    /// child counts agree with it.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::arg(format!("malformed tree: {msg}")));
        let set = self.label_set();
        // (i)
        if !self.nodes.contains_key(&Vec::new()) {
            return bad("root missing".into());
        }
        // (ii)
        for word in &set {
            if let Some((_, parent)) = word.split_last() {
                if parent.contains(&Letter::Delta) || !set.contains(parent) {
                    return bad(format!("{word:?} has no parent in the tree"));
                }
            }
        }
        // (iii)
        if let Some(len) = set.iter().filter(|w| w.last() == Some(&Letter::Delta)).map(Vec::len).min() {
            if let Some(w) = set.iter().find(|w| w.len() > len) {
                return bad(format!("{w:?} lies beyond the defective element at length {len}"));
            }
        }
        // (iv) and (v), checked against the stored counts
        for (label, count) in &self.nodes {
            let children = self.nodes.range(child_range(label)).filter(|(l, _)| l.len() == label.len() + 1).count();
            match count {
                Some(ChildCount::Delta) | None if children > 0 => {
                    return bad(format!("{label:?} has numeric children but count {count:?}"));
                }
                Some(ChildCount::Count(c)) => {
                    if children != *c as usize {
                        return bad(format!("{label:?} stores {c} children but has {children}"));
                    }
                    for j in 1..=*c {
                        let mut child = label.clone();
                        child.push(j);
                        if !self.nodes.contains_key(&child) {
                            return bad(format!("{label:?} is missing child {j}"));
                        }
                    }
                }
                _ => {}
            }
            if label.contains(&0) {
                return bad(format!("{label:?} uses index 0"));
            }
        }
        Ok(())
    }

    /// Length of the shortest defective element, if any.
    fn delta_length(&self) -> Option<usize> {
        self.nodes.iter().filter(|(_, c)| **c == Some(ChildCount::Delta)).map(|(l, _)| l.len() + 1).min()
    }

    fn max_generation(&self) -> usize {
        self.nodes.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// `h(t)`: one less than the generation at which the process is
    /// absorbed, or the deepest generation stored when it is not.
    pub fn height(&self) -> usize {
        match self.delta_length() {
            Some(len) => len - 1,
            None => {
                let counts = self.generation_counts();
                // a last generation made only of childless nodes means
                // extinction one step later
                counts.len() - 1
            }
        }
    }

    /// Whether some node below the defective generation was left unexpanded,
    /// so that generation sizes past [`Self::determined_through`] are unknown.
    pub fn is_truncated(&self) -> bool {
        self.delta_length().is_none() && self.nodes.values().any(Option::is_none)
    }

    /// Largest `m` with `z_m(t)` determined by the stored nodes.
    pub fn determined_through(&self) -> usize {
        if self.is_truncated() {
            self.nodes.iter().filter(|(_, c)| c.is_none()).map(|(l, _)| l.len()).min().unwrap_or(0)
        } else {
            usize::MAX
        }
    }

    fn generation_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.max_generation() + 1];
        for l in self.nodes.keys() {
            counts[l.len()] += 1;
        }
        counts
    }

    /// `z_0(t), …, z_m(t)` with `m = min(n, determined_through())`.
    pub fn gen_sizes(&self, n: usize) -> Vec<State> {
        let h = self.height();
        let counts = self.generation_counts();
        let has_delta = self.delta_length().is_some();
        let m = n.min(self.determined_through());
        (0..=m)
            .map(|k| {
                if k <= h {
                    State::Count(counts[k])
                } else if has_delta {
                    State::Delta
                } else {
                    State::Count(0)
                }
            })
            .collect()
    }

    /// `z_n(t)`, or `None` when the stored nodes do not determine it.
    pub fn z(&self, n: usize) -> Option<State> {
        if n > self.determined_through() {
            return None;
        }
        self.gen_sizes(n).pop()
    }

    /// `τ_a > n` for the associated process.
    pub fn survives(&self, n: usize) -> bool {
        matches!(self.z(n), Some(State::Count(k)) if k > 0)
    }

    /// The subtree `t_j = {i : j i ∈ t}` of the `j`-th child of the root.
    pub fn subtree(&self, j: u32) -> Option<DefectiveTree> {
        let start = vec![j];
        if !self.nodes.contains_key(&start) {
            return None;
        }
        let nodes = self
            .nodes
            .range(child_range(&[]))
            .filter(|(l, _)| l.first() == Some(&j))
            .map(|(l, c)| (l[1..].to_vec(), *c))
            .collect();
        Some(DefectiveTree { nodes })
    }

    /// Attach `sub` at `at`, replacing the (unexpanded) node there.
    pub(crate) fn graft(&mut self, at: &[u32], sub: &DefectiveTree) {
        for (l, c) in &sub.nodes {
            let mut full = at.to_vec();
            full.extend_from_slice(l);
            self.nodes.insert(full, *c);
        }
    }

    pub(crate) fn set(&mut self, label: Label, count: Option<ChildCount>) {
        self.nodes.insert(label, count);
    }

    /// Child counts of generations `< n` in breadth-first order. Two trees
    /// agree up to height `n` exactly when their keys agree.
    pub fn prefix_key(&self, n: usize) -> Vec<Option<ChildCount>> {
        self.bfs().into_iter().filter(|(l, _)| l.len() < n).map(|(_, c)| c).collect()
    }

    /// Newline-separated `label,child_count` records in breadth-first
    /// order; labels are dot-joined, the root is the empty string, `Δ` is
    /// `D` and unexpanded counts are `?`.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (label, count) in self.bfs() {
            let l: Vec<String> = label.iter().map(u32::to_string).collect();
            let c = match count {
                Some(ChildCount::Count(k)) => k.to_string(),
                Some(ChildCount::Delta) => "D".into(),
                None => "?".into(),
            };
            out.push_str(&l.join("."));
            out.push(',');
            out.push_str(&c);
            out.push('\n');
        }
        out
    }

    pub fn from_records(text: &str) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (label, count) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::arg(format!("line {}: expected label,child_count", lineno + 1)))?;
            let label: Label = if label.is_empty() {
                Vec::new()
            } else {
                label
                    .split('.')
                    .map(|p| p.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::arg(format!("line {}: {e}", lineno + 1)))?
            };
            let count = match count {
                "D" => Some(ChildCount::Delta),
                "?" => None,
                k => Some(ChildCount::Count(
                    k.parse().map_err(|e| Error::arg(format!("line {}: {e}", lineno + 1)))?,
                )),
            };
            if nodes.insert(label, count).is_some() {
                return Err(Error::arg(format!("line {}: duplicate label", lineno + 1)));
            }
        }
        DefectiveTree::from_nodes(nodes)
    }
}

fn child_range(label: &[u32]) -> (std::ops::Bound<Label>, std::ops::Bound<Label>) {
    use std::ops::Bound;
    let mut lo = label.to_vec();
    lo.push(0);
    let hi = match label.split_last() {
        Some((last, rest)) => {
            let mut h = rest.to_vec();
            h.push(last.saturating_add(1));
            Bound::Excluded(h)
        }
        None => Bound::Unbounded,
    };
    (Bound::Included(lo), hi)
}

impl fmt::Display for DefectiveTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_records())
    }
}

/// `P_v[T =_h t]`.
pub fn prefix_prob(env: &Environment, tree: &DefectiveTree, h: usize) -> Result<f64> {
    tree.validate()?;
    let window = env.window(h.max(tree.height() + 1));
    let height = tree.height();
    let defective = tree.delta_length().is_some();
    // cases (i)/(ii) use generations below h; case (iii) uses generations up to h(t)
    let limit = if defective && h > height { height + 1 } else { h };
    let mut p = 1.0;
    for (label, count) in tree.nodes() {
        let g = label.len();
        if g >= limit {
            continue;
        }
        let f = window.law(g + 1);
        p *= match count {
            Some(ChildCount::Count(c)) => f.mass(*c as usize),
            Some(ChildCount::Delta) => f.defect(),
            None => {
                return Err(Error::arg(format!(
                    "node {label:?} at generation {g} is unexpanded; the prefix of height {h} is undetermined"
                )))
            }
        };
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeStats {
    pub height: usize,
    pub gen_sizes: Vec<State>,
    /// `R_n`; `None` encodes `∞`.
    pub r_n: Option<u32>,
}

/// `h(t)`, `z_0..z_n` and the rank `R_n` of the left-most child of the
/// root with a live descendant in generation `n`.
pub fn tree_stats(tree: &DefectiveTree, n: usize) -> Result<TreeStats> {
    tree.validate()?;
    let r_n = if n == 0 {
        None
    } else {
        let z1 = match tree.child_count(&[]) {
            Some(Some(ChildCount::Count(c))) => c,
            _ => 0,
        };
        (1..=z1).find(|&i| {
            tree.subtree(i).is_some_and(|t| matches!(t.z(n - 1), Some(State::Count(k)) if k > 0))
        })
    };
    Ok(TreeStats { height: tree.height(), gen_sizes: tree.gen_sizes(n), r_n })
}
