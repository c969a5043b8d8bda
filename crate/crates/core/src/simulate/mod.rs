//! Monte Carlo simulation of `{Z_n}`.
//!
//! Two routes produce the same law: [`Mode::Direct`] sums per-individual
//! draws from the defective laws, [`Mode::Coupled`] runs the normalized
//! process `Z̃` and sends it to `Δ` with probability `1 - f_n(1)^{Z̃_{n-1}}`.
//! Replicates run in parallel on per-replicate streams (see [`rng`]) and are
//! reduced in replicate order, so summaries do not depend on scheduling.

pub mod kernel;
pub mod rng;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::{Environment, Error, Result, State};
use kernel::{step_coupled, step_direct, GenerationPlan, Step};

/// Default cap on the population of a single generation. Aggregated steps
/// cost the same at any size, so the cap only guards integer range.
pub const DEFAULT_POPULATION_CAP: u64 = 1 << 53;

/// Alive values above this are pooled in the histogram.
pub const HISTOGRAM_MAX: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Coupled,
}

impl Mode {
    fn domain(self) -> u64 {
        match self {
            Mode::Direct => rng::domain::DIRECT,
            Mode::Coupled => rng::domain::COUPLED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Terminal {
    Extinct { at: usize },
    Absorbed { at: usize },
    Alive { value: u64 },
    /// The cap was exceeded at generation `at`.
    Overflow { at: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    /// `Z_0..Z_T`; truncated at the overflow generation.
    pub trajectory: Vec<State>,
    pub terminal: Terminal,
    pub mode: Mode,
    /// `Z_T / μ_T` on alive paths.
    pub w_at_horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub population_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { threads: None, population_cap: DEFAULT_POPULATION_CAP }
    }
}

/// Precomputed per-generation plans plus `log μ_n`.
#[derive(Debug, Clone)]
pub struct SimPlan {
    gens: Vec<GenerationPlan>,
    log_mu: Vec<f64>,
}

impl SimPlan {
    pub fn new(env: &Environment, horizon: usize) -> Self {
        let gens: Vec<GenerationPlan> = (1..=horizon).map(|n| GenerationPlan::new(env.law(n))).collect();
        let mut log_mu = Vec::with_capacity(horizon + 1);
        log_mu.push(0.0);
        for g in &gens {
            log_mu.push(log_mu.last().unwrap() + g.law.mean().ln());
        }
        SimPlan { gens, log_mu }
    }

    pub fn horizon(&self) -> usize {
        self.gens.len()
    }

    /// `log μ_n`
    pub fn log_mu(&self, n: usize) -> f64 {
        self.log_mu[n]
    }
}

/// Walk one replicate, calling `visit(n, Z_n)` after every generation.
fn walk(
    plan: &SimPlan,
    mode: Mode,
    master_seed: u64,
    replicate: u64,
    cap: u64,
    mut visit: impl FnMut(usize, State),
) -> Terminal {
    let mut rng = rng::stream(master_seed, mode.domain(), replicate);
    let mut z = State::Count(1);
    visit(0, z);
    for n in 1..=plan.horizon() {
        let count = match z {
            State::Delta => return Terminal::Absorbed { at: n - 1 },
            State::Count(0) => return Terminal::Extinct { at: n - 1 },
            State::Count(k) => k,
        };
        rng::seek_generation(&mut rng, n);
        let gen = &plan.gens[n - 1];
        let step = match mode {
            Mode::Direct => step_direct(&gen.law, count, cap, &mut rng),
            Mode::Coupled => step_coupled(gen, count, cap, &mut rng),
        };
        z = match step {
            Step::Next(s) => s,
            Step::Overflow => return Terminal::Overflow { at: n },
        };
        visit(n, z);
    }
    match z {
        State::Delta => Terminal::Absorbed { at: plan.horizon() },
        State::Count(0) => Terminal::Extinct { at: plan.horizon() },
        State::Count(k) => Terminal::Alive { value: k },
    }
}

fn terminal_w(plan: &SimPlan, terminal: Terminal) -> Option<f64> {
    match terminal {
        Terminal::Alive { value } => Some(value as f64 * (-plan.log_mu(plan.horizon())).exp()),
        _ => None,
    }
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::arg(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// One trajectory on replicate `replicate` of `master_seed`.
pub fn run_path(env: &Environment, horizon: usize, mode: Mode, master_seed: u64, replicate: u64) -> PathSample {
    let plan = SimPlan::new(env, horizon);
    path_from_plan(&plan, mode, master_seed, replicate, DEFAULT_POPULATION_CAP)
}

fn path_from_plan(plan: &SimPlan, mode: Mode, master_seed: u64, replicate: u64, cap: u64) -> PathSample {
    let mut trajectory = Vec::with_capacity(plan.horizon() + 1);
    let terminal = walk(plan, mode, master_seed, replicate, cap, |_, z| trajectory.push(z));
    if !matches!(terminal, Terminal::Overflow { .. }) {
        // absorbing states repeat to the horizon
        let last = *trajectory.last().unwrap();
        trajectory.resize(plan.horizon() + 1, last);
    }
    PathSample { trajectory, terminal, mode, w_at_horizon: terminal_w(plan, terminal) }
}

/// `reps` full trajectories, in replicate order.
pub fn run_paths(
    env: &Environment,
    horizon: usize,
    reps: u64,
    mode: Mode,
    master_seed: u64,
    opts: SimOptions,
) -> Result<Vec<PathSample>> {
    let plan = SimPlan::new(env, horizon);
    with_pool(opts.threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| path_from_plan(&plan, mode, master_seed, r, opts.population_cap))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn proportion(count: u64, reps: u64) -> Self {
        let p = count as f64 / reps as f64;
        Estimate { value: p, se: (p * (1.0 - p) / reps as f64).sqrt() }
    }

    fn mean(sum: f64, sum_sq: f64, n: u64) -> Self {
        if n == 0 {
            return Estimate { value: f64::NAN, se: f64::NAN };
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Estimate { value: mean, se: (var / nf).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub extinct: u64,
    pub absorbed_delta: u64,
    pub alive: u64,
    pub overflow: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub reps: u64,
    pub horizon: usize,
    pub mode: Mode,
    pub master_seed: u64,
    pub counts: Counts,
    /// `P[τ_a > n]`; overflowed paths count as alive.
    pub survival: Estimate,
    /// `P[τ_0 ≤ n]`
    pub p_ext: Estimate,
    /// `P[τ_Δ ≤ n]`
    pub p_delta: Estimate,
    /// `E[Z_n | alive]`, overflowed paths excluded.
    pub cond_mean: Estimate,
    /// `Z_n` on alive paths; key `HISTOGRAM_MAX + 1` pools larger values.
    pub histogram: BTreeMap<u64, u64>,
    /// `Z_n / μ_n` over all non-overflowed replicates, absorbed paths as 0,
    /// so that its mean estimates `E[Z_n] / μ_n`.
    pub w_mean: Estimate,
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    terminal: Terminal,
    w: Option<f64>,
}

pub fn monte_carlo(
    env: &Environment,
    horizon: usize,
    reps: u64,
    mode: Mode,
    master_seed: u64,
    opts: SimOptions,
) -> Result<McSummary> {
    if reps == 0 {
        return Err(Error::arg("reps must be at least 1"));
    }
    let plan = SimPlan::new(env, horizon);
    let outcomes: Vec<RepOutcome> = with_pool(opts.threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let terminal = walk(&plan, mode, master_seed, r, opts.population_cap, |_, _| {});
                RepOutcome { terminal, w: terminal_w(&plan, terminal) }
            })
            .collect()
    })?;

    let mut counts = Counts { extinct: 0, absorbed_delta: 0, alive: 0, overflow: 0 };
    let mut histogram = BTreeMap::new();
    let (mut z_sum, mut z_sq) = (0.0, 0.0);
    let (mut w_sum, mut w_sq, mut w_n) = (0.0, 0.0, 0u64);
    for o in &outcomes {
        match o.terminal {
            Terminal::Extinct { .. } => counts.extinct += 1,
            Terminal::Absorbed { .. } => counts.absorbed_delta += 1,
            Terminal::Overflow { .. } => counts.overflow += 1,
            Terminal::Alive { value } => {
                counts.alive += 1;
                *histogram.entry(value.min(HISTOGRAM_MAX + 1)).or_insert(0u64) += 1;
                let v = value as f64;
                z_sum += v;
                z_sq += v * v;
            }
        }
        if !matches!(o.terminal, Terminal::Overflow { .. }) {
            let w = o.w.unwrap_or(0.0);
            w_sum += w;
            w_sq += w * w;
            w_n += 1;
        }
    }
    Ok(McSummary {
        reps,
        horizon,
        mode,
        master_seed,
        counts,
        survival: Estimate::proportion(counts.alive + counts.overflow, reps),
        p_ext: Estimate::proportion(counts.extinct, reps),
        p_delta: Estimate::proportion(counts.absorbed_delta, reps),
        cond_mean: Estimate::mean(z_sum, z_sq, counts.alive),
        histogram,
        w_mean: Estimate::mean(w_sum, w_sq, w_n),
    })
}

/// Bins for comparing terminal laws: `0`, `Δ`, `1..=9`, `10+`.
pub const AGREEMENT_BINS: usize = 12;

fn agreement_bin(t: Terminal) -> usize {
    match t {
        Terminal::Extinct { .. } => 0,
        Terminal::Absorbed { .. } => 1,
        Terminal::Alive { value } if value <= 9 => 1 + value as usize,
        Terminal::Alive { .. } | Terminal::Overflow { .. } => 11,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub horizon: usize,
    pub reps: u64,
    pub direct: Vec<u64>,
    pub coupled: Vec<u64>,
    pub tv_distance: f64,
    /// Two-sample chi-square over the nonempty bins.
    pub chi2_stat: f64,
    pub nonempty_bins: usize,
    pub threshold: f64,
    /// Fewer than two nonempty bins; the comparison is vacuous.
    pub degenerate: bool,
    pub pass: bool,
}

/// Compare the terminal law of both routes on disjoint streams.
pub fn mode_agreement(
    env: &Environment,
    horizon: usize,
    reps: u64,
    master_seed: u64,
    opts: SimOptions,
) -> Result<Agreement> {
    if reps == 0 {
        return Err(Error::arg("reps must be at least 1"));
    }
    let plan = SimPlan::new(env, horizon);
    let histogram = |mode: Mode| -> Result<Vec<u64>> {
        let bins: Vec<usize> = with_pool(opts.threads, || {
            (0..reps)
                .into_par_iter()
                .map(|r| agreement_bin(walk(&plan, mode, master_seed, r, opts.population_cap, |_, _| {})))
                .collect()
        })?;
        let mut h = vec![0u64; AGREEMENT_BINS];
        for b in bins {
            h[b] += 1;
        }
        Ok(h)
    };
    let direct = histogram(Mode::Direct)?;
    let coupled = histogram(Mode::Coupled)?;
    let n = reps as f64;
    let mut tv = 0.0;
    let mut chi2 = 0.0;
    let mut nonempty = 0;
    for (&a, &b) in direct.iter().zip(&coupled) {
        tv += (a as f64 - b as f64).abs() / n;
        if a + b > 0 {
            nonempty += 1;
            let d = a as f64 - b as f64;
            chi2 += d * d / (a + b) as f64;
        }
    }
    let tv = 0.5 * tv;
    let threshold = 3.0 * (nonempty as f64 / n).sqrt();
    let degenerate = nonempty < 2;
    Ok(Agreement {
        horizon,
        reps,
        direct,
        coupled,
        tv_distance: tv,
        chi2_stat: chi2,
        nonempty_bins: nonempty,
        threshold,
        degenerate,
        pass: tv <= threshold,
    })
}
