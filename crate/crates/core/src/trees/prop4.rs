//! The spine construction against the exact conditional law and against
//! rejection.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{enumerate_conditioned, rejection_conditioned, ChildCount, ConditionedSampler};
use crate::simulate::rng::{domain, stream};
use crate::{Environment, Result};

type Key = Vec<Option<ChildCount>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop4Report {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub survival: f64,
    /// Atoms of the exact law, or distinct prefixes observed when the law
    /// was not enumerated.
    pub atoms: usize,
    /// `None` when enumeration was infeasible.
    pub tv_vs_exact: Option<f64>,
    pub tv_sampler_vs_rejection: f64,
    pub threshold: f64,
    /// Total unconditioned draws made by the rejection sampler.
    pub rejection_draws: u64,
    pub pass: bool,
}

fn empirical(keys: Vec<Key>) -> BTreeMap<Key, f64> {
    let total = keys.len() as f64;
    let mut counts: BTreeMap<Key, u64> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect()
}

fn tv(a: &BTreeMap<Key, f64>, b: &BTreeMap<Key, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, p) in a {
        sum += (p - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, q) in b {
        if !a.contains_key(k) {
            sum += q;
        }
    }
    0.5 * sum
}

/// Draw `samples` trees from the spine construction and from rejection,
/// each on per-index streams of `seed`, and compare their height-`n`
/// prefix laws with each other and with the enumerated law when every law
/// up to `n` has finite support.
pub fn validate_prop4(env: &Environment, n: usize, samples: u64, seed: u64) -> Result<Prop4Report> {
    let sampler = ConditionedSampler::new(env, n, 0)?;
    let survival = env.window(n).sweep(n)?.survival();
    let exact = {
        let window = env.window(n);
        let max_k = window.laws().iter().map(|l| l.support_max()).try_fold(0usize, |m, s| s.map(|s| m.max(s)));
        max_k.and_then(|k| enumerate_conditioned(env, n, k).ok())
    };

    let spine_keys: Vec<Key> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::TREE_CONDITIONED, i);
            sampler.sample(&mut rng).map(|(t, _)| t.prefix_key(n))
        })
        .collect::<Result<_>>()?;
    let max_tries = (1000.0 / survival).ceil().min(u64::MAX as f64) as u64;
    let rejected: Vec<(Key, u64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain::TREE_REJECTION, i);
            rejection_conditioned(env, n, &mut rng, max_tries).map(|(t, tries)| (t.prefix_key(n), tries))
        })
        .collect::<Result<_>>()?;
    let rejection_draws = rejected.iter().map(|x| x.1).sum();

    let spine_law = empirical(spine_keys);
    let rejection_law = empirical(rejected.into_iter().map(|x| x.0).collect());
    let tv_sampler_vs_rejection = tv(&spine_law, &rejection_law);
    let (atoms, tv_vs_exact) = match &exact {
        Some(law) => (law.atoms.len(), Some(tv(&spine_law, &law.atoms))),
        None => {
            let seen: std::collections::BTreeSet<&Key> = spine_law.keys().chain(rejection_law.keys()).collect();
            (seen.len(), None)
        }
    };
    let threshold = f64::max(0.01, 3.0 * (atoms as f64 / samples as f64).sqrt());
    let pass = tv_sampler_vs_rejection <= threshold && tv_vs_exact.is_none_or(|d| d <= threshold);
    Ok(Prop4Report {
        n,
        samples,
        seed,
        survival,
        atoms,
        tv_vs_exact,
        tv_sampler_vs_rejection,
        threshold,
        rejection_draws,
        pass,
    })
}
