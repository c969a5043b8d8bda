//! Unconditioned DBTVE growth and the rejection oracle for `{τ_a > n}`.

use std::collections::BTreeMap;

use rand::Rng;

use super::{ChildCount, DefectiveTree, Label};
use crate::{Environment, Error, OffspringLaw, Result, State};

/// Largest number of nodes a single sampled tree may hold.
pub const NODE_BUDGET: usize = 1_000_000;

/// Grow a tree generation by generation, drawing the counts of generation
/// `g` nodes from `laws[g]`. Every node of a generation draws before the
/// first `Δ` stops growth; the children of the other nodes of that
/// generation are stored unexpanded, as are the nodes at `depth_cap`.
pub(crate) fn grow<R: Rng + ?Sized>(laws: &[OffspringLaw], depth_cap: usize, rng: &mut R) -> Result<DefectiveTree> {
    assert!(depth_cap <= laws.len(), "depth cap {depth_cap} beyond {} laws", laws.len());
    let mut nodes: BTreeMap<Label, Option<ChildCount>> = BTreeMap::new();
    let mut current: Vec<Label> = vec![Vec::new()];
    let mut total = 1usize;
    for law in &laws[..depth_cap] {
        if current.is_empty() {
            break;
        }
        let mut next = Vec::new();
        let mut absorbed = false;
        for label in current {
            let count = match law.sample(rng) {
                State::Delta => {
                    absorbed = true;
                    ChildCount::Delta
                }
                State::Count(k) => {
                    total = total.saturating_add(k as usize);
                    if total > NODE_BUDGET {
                        return Err(Error::Budget(format!("tree exceeds {NODE_BUDGET} nodes")));
                    }
                    for j in 1..=k as u32 {
                        let mut child = label.clone();
                        child.push(j);
                        next.push(child);
                    }
                    ChildCount::Count(k as u32)
                }
            };
            nodes.insert(label, Some(count));
        }
        current = next;
        if absorbed {
            break;
        }
    }
    for label in current {
        nodes.insert(label, None);
    }
    Ok(DefectiveTree::from_map_unchecked(nodes))
}

/// A DBTVE over `env`, grown to `depth_cap` generations.
pub fn sample_dbtve<R: Rng + ?Sized>(env: &Environment, depth_cap: usize, rng: &mut R) -> Result<DefectiveTree> {
    grow(env.window(depth_cap).laws(), depth_cap, rng)
}

/// Draw DBTVEs grown to height `n` until one has `τ_a > n`. Returns the tree
/// and the number of draws used.
pub fn rejection_conditioned<R: Rng + ?Sized>(
    env: &Environment,
    n: usize,
    rng: &mut R,
    max_tries: u64,
) -> Result<(DefectiveTree, u64)> {
    let window = env.window(n);
    let survival = window.sweep(n)?.survival();
    if !(survival > 0.0) || 1.0 / survival > max_tries as f64 / 10.0 {
        return Err(Error::pre(format!(
            "expected {:.3e} tries for P[τ_a > {n}] = {survival:.3e}, more than a tenth of max_tries = {max_tries}",
            1.0 / survival
        )));
    }
    for tries in 1..=max_tries {
        let tree = grow(window.laws(), n, rng)?;
        if tree.survives(n) {
            return Ok((tree, tries));
        }
    }
    Err(Error::Budget(format!("no tree with τ_a > {n} in {max_tries} tries")))
}
