//! Trees conditioned on `{τ_a > n}`, built along a distinguished path.
//!
//! Level `l` of the spine draws `(D_l, C_l)` from `g_{l,n}`, gives `Λ_{l-1}`
//! `C_l` children and continues through child `D_l`. The siblings at level
//! `l` sit in generation `l` and found trees over `v_l = {f_{l+1}, …}` with
//! `n - l` generations left to the horizon:
//!
//! | siblings     | event              | probability     |
//! |--------------|--------------------|-----------------|
//! | left of `D`  | `τ_0 ≤ n - l`      | `f_{l,n}(0)`    |
//! | right of `D` | `τ_Δ > n - l`      | `f_{l,n}(1)`    |
//!
//! Both are the events `{τ_0 ≤ n - 1}` and `{τ_Δ > n - 1}` of the one-step
//! decomposition applied at generation `l` with horizon `n - l`. Each is
//! sampled by rejection with a budget of twenty times the expected number of
//! draws.

use rand::Rng;
use serde::Serialize;

use super::sample::grow;
use super::{ChildCount, DefectiveTree, Label};
use crate::offspring::LF_TAIL_REL;
use crate::{Environment, Error, OffspringLaw, Result, State};

const REJECTION_FACTOR: f64 = 20.0;

/// Upper limit on the number of `(d, c)` pairs listed by [`spine_dist`].
const PAIR_BUDGET: usize = 10_000_000;

/// `g_{l,n}[d, c]` for `1 ≤ d ≤ c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpineDist {
    pub l: usize,
    pub n: usize,
    /// `((d, c), g_{l,n}[d, c])` over the positive weights.
    pub weights: Vec<((u32, u32), f64)>,
    pub total: f64,
}

/// `(D_l, C_l)` and `Λ_l = D_1…D_l` for `l = 1..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpineRecord {
    pub pairs: Vec<(u32, u32)>,
    pub spine: Vec<Label>,
}

/// Offspring masses `f_l[c]` for `c ≥ 1`, truncated for linear fractional laws.
fn positive_masses(law: &OffspringLaw) -> Vec<(u32, f64)> {
    law.coefficients(LF_TAIL_REL)
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|&(_, w)| w > 0.0)
        .map(|(c, w)| (c as u32, w))
        .collect()
}

struct Level {
    /// `(c, P[C_l ≤ c])`
    c_cdf: Vec<(u32, f64)>,
    /// `f_{l,n}(1)`, `f_{l,n}(0)`
    a: f64,
    b: f64,
}

impl Level {
    fn new(law: &OffspringLaw, a: f64, b: f64, log_dq: f64) -> Self {
        let dq = log_dq.exp();
        let mut c_cdf = Vec::new();
        let mut acc = 0.0;
        // h_c = Σ_{d=1}^c b^{d-1} a^{c-d}
        let (mut h, mut a_pow, mut last) = (0.0, 1.0, 0u32);
        for (c, w) in positive_masses(law) {
            while last < c {
                h = a_pow + b * h;
                a_pow *= a;
                last += 1;
            }
            acc += w * h / dq;
            c_cdf.push((c, acc));
        }
        Level { c_cdf, a, b }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let total = self.c_cdf.last().map_or(0.0, |x| x.1);
        let u = rng.random::<f64>() * total;
        let i = self.c_cdf.partition_point(|&(_, p)| p <= u).min(self.c_cdf.len() - 1);
        let c = self.c_cdf[i].0;
        // d | c has weight b^{d-1} a^{c-d}
        let weights: Vec<f64> = (1..=c).map(|d| self.b.powi(d as i32 - 1) * self.a.powi((c - d) as i32)).collect();
        let sum: f64 = weights.iter().sum();
        let mut v = rng.random::<f64>() * sum;
        for (j, w) in weights.iter().enumerate() {
            if v < *w {
                return (j as u32 + 1, c);
            }
            v -= w;
        }
        let d = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32 + 1;
        (d, c)
    }
}

/// The law of `(D_l, C_l)`.
pub fn spine_dist(env: &Environment, l: usize, n: usize) -> Result<SpineDist> {
    if l == 0 || l > n {
        return Err(Error::arg(format!("spine level l = {l} outside 1..={n}")));
    }
    let window = env.window(n);
    let sweep = window.sweep(n)?;
    if sweep.log_survival_from(l - 1) == f64::NEG_INFINITY {
        return Err(Error::pre(format!("f_{{{},{n}}}(1) = f_{{{},{n}}}(0)", l - 1, l - 1)));
    }
    let (a, b) = (sweep.at_one(l), sweep.at_zero(l));
    let dq = sweep.log_divided_difference(l).exp();
    let mut weights = Vec::new();
    for (c, w) in positive_masses(window.law(l)) {
        if weights.len() + c as usize > PAIR_BUDGET {
            return Err(Error::Budget(format!("g_{{{l},{n}}} has more than {PAIR_BUDGET} pairs")));
        }
        for d in 1..=c {
            let g = w * b.powi(d as i32 - 1) * a.powi((c - d) as i32) / dq;
            if g > 0.0 {
                weights.push(((d, c), g));
            }
        }
    }
    let total = weights.iter().map(|x| x.1).sum();
    Ok(SpineDist { l, n, weights, total })
}

/// Precomputed tables for repeated conditioned draws at a fixed horizon.
pub struct ConditionedSampler {
    n: usize,
    extra_depth: usize,
    laws: Vec<OffspringLaw>,
    levels: Vec<Level>,
}

impl ConditionedSampler {
    /// `extra_depth` generations of the unconditioned tree on top of `Λ_n`
    /// are grown; deeper nodes, and the generation-`n` nodes off the spine,
    /// stay unexpanded.
    pub fn new(env: &Environment, n: usize, extra_depth: usize) -> Result<Self> {
        let window = env.window(n + extra_depth);
        let sweep = window.sweep(n)?;
        if sweep.log_survival() == f64::NEG_INFINITY {
            return Err(Error::pre(format!("P[τ_a > {n}] = 0")));
        }
        let levels = (1..=n)
            .map(|l| Level::new(window.law(l), sweep.at_one(l), sweep.at_zero(l), sweep.log_divided_difference(l)))
            .collect();
        Ok(ConditionedSampler { n, extra_depth, laws: window.laws().to_vec(), levels })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    fn subtree<R: Rng + ?Sized>(
        &self,
        l: usize,
        accept_prob: f64,
        accept: impl Fn(&DefectiveTree) -> bool,
        rng: &mut R,
    ) -> Result<DefectiveTree> {
        let depth = self.n - l;
        let budget = (REJECTION_FACTOR / accept_prob).ceil();
        if !budget.is_finite() || budget > u64::MAX as f64 {
            return Err(Error::Budget(format!("acceptance probability {accept_prob:.3e} at level {l}")));
        }
        for _ in 0..budget as u64 {
            let t = grow(&self.laws[l..], depth, rng)?;
            if accept(&t) {
                return Ok(t);
            }
        }
        Err(Error::Budget(format!(
            "subtree at level {l} not accepted in {budget} draws (acceptance probability {accept_prob:.3e})"
        )))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DefectiveTree, SpineRecord)> {
        let mut tree = DefectiveTree::root_only();
        let mut parent: Label = Vec::new();
        let mut record = SpineRecord { pairs: Vec::with_capacity(self.n), spine: Vec::with_capacity(self.n) };
        for (idx, level) in self.levels.iter().enumerate() {
            let l = idx + 1;
            let (d, c) = level.draw(rng);
            tree.set(parent.clone(), Some(ChildCount::Count(c)));
            let remaining = self.n - l;
            for i in 1..=c {
                let mut child = parent.clone();
                child.push(i);
                if i < d {
                    let sub = self.subtree(l, level.b, |t| t.z(remaining) == Some(State::Count(0)), rng)?;
                    tree.graft(&child, &sub);
                } else if i > d {
                    let sub = self.subtree(l, level.a, |t| !t.nodes().values().any(|c| *c == Some(ChildCount::Delta)), rng)?;
                    tree.graft(&child, &sub);
                } else {
                    tree.set(child, None);
                }
            }
            parent.push(d);
            record.pairs.push((d, c));
            record.spine.push(parent.clone());
        }
        let top = grow(&self.laws[self.n..], self.extra_depth, rng)?;
        tree.graft(&parent, &top);
        debug_assert!(tree.validate().is_ok(), "{tree}");
        Ok((tree, record))
    }
}

/// One tree conditioned on `{τ_a > n}`, with nothing grown above generation `n`.
pub fn sample_conditioned<R: Rng + ?Sized>(
    env: &Environment,
    n: usize,
    rng: &mut R,
) -> Result<(DefectiveTree, SpineRecord)> {
    ConditionedSampler::new(env, n, 0)?.sample(rng)
}
