//! Exact law of the height-`n` prefix of a DBTVE given `{τ_a > n}`, by
//! listing every prefix.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ChildCount;
use crate::{Environment, Error, Result};

/// Largest number of partial prefixes visited by one enumeration.
pub const ENUMERATION_BUDGET: u64 = 5_000_000;

/// The conditional law of [`DefectiveTree::prefix_key`](super::DefectiveTree::prefix_key)
/// at height `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedLaw {
    pub n: usize,
    /// Prefix keys with their conditional probabilities.
    #[serde(skip)]
    pub atoms: BTreeMap<Vec<Option<ChildCount>>, f64>,
    /// `marginals[k - 1][z] = P[z_k = z | τ_a > n]` for `k = 1..=n`.
    pub marginals: Vec<BTreeMap<u64, f64>>,
    /// Unconditioned mass of the listed prefixes.
    pub enumerated_mass: f64,
    /// `P[τ_a > n]` from the composed generating functions.
    pub survival: f64,
}

struct Walk<'a> {
    n: usize,
    supports: &'a [Vec<(u32, f64)>],
    visits: u64,
    key: Vec<Option<ChildCount>>,
    sizes: Vec<u64>,
    atoms: Vec<(Vec<Option<ChildCount>>, Vec<u64>, f64)>,
}

impl Walk<'_> {
    /// Assign counts to the `left` remaining nodes of generation `g`.
    fn generation(&mut self, g: usize, left: u64, next: u64, weight: f64) -> Result<()> {
        self.visits += 1;
        if self.visits > ENUMERATION_BUDGET {
            return Err(Error::Budget(format!("more than {ENUMERATION_BUDGET} partial prefixes")));
        }
        if left > 0 {
            for i in 0..self.supports[g].len() {
                let (c, w) = self.supports[g][i];
                self.key.push(Some(ChildCount::Count(c)));
                self.generation(g, left - 1, next + c as u64, weight * w)?;
                self.key.pop();
            }
            return Ok(());
        }
        // generation g is complete and generation g + 1 has `next` nodes
        if next == 0 {
            return Ok(());
        }
        self.sizes.push(next);
        if g + 1 == self.n {
            self.atoms.push((self.key.clone(), self.sizes.clone(), weight));
        } else {
            self.generation(g + 1, next, 0, weight)?;
        }
        self.sizes.pop();
        Ok(())
    }
}

/// Every prefix of height `n` with `τ_a > n`, weighted by its probability
/// and normalized. All laws on generations `1..=n` must have support in
/// `{0..max_k}`.
pub fn enumerate_conditioned(env: &Environment, n: usize, max_k: usize) -> Result<ConditionedLaw> {
    let window = env.window(n);
    let mut supports = Vec::with_capacity(n);
    for g in 1..=n {
        let law = window.law(g);
        match (law.weights(), law.support_max()) {
            (Some(w), Some(top)) if top <= max_k => supports.push(
                w.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(c, &p)| (c as u32, p)).collect::<Vec<_>>(),
            ),
            _ => {
                return Err(Error::arg(format!("f_{g} has mass beyond {max_k}")));
            }
        }
    }
    let survival = window.sweep(n)?.survival();
    let mut walk = Walk { n, supports: &supports, visits: 0, key: Vec::new(), sizes: Vec::new(), atoms: Vec::new() };
    if n == 0 {
        walk.atoms.push((Vec::new(), Vec::new(), 1.0));
    } else {
        walk.generation(0, 1, 0, 1.0)?;
    }
    let enumerated_mass: f64 = walk.atoms.iter().map(|a| a.2).sum();
    if !(enumerated_mass > 0.0) {
        return Err(Error::pre(format!("P[τ_a > {n}] = 0")));
    }
    let mut atoms = BTreeMap::new();
    let mut marginals = vec![BTreeMap::new(); n];
    for (key, sizes, w) in walk.atoms {
        let p = w / enumerated_mass;
        for (k, &z) in sizes.iter().enumerate() {
            *marginals[k].entry(z).or_insert(0.0) += p;
        }
        *atoms.entry(key).or_insert(0.0) += p;
    }
    Ok(ConditionedLaw { n, atoms, marginals, enumerated_mass, survival })
}
