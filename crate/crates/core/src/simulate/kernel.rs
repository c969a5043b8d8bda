//! One generation of the process, for a whole population at once.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::{OffspringLaw, State};

/// Populations up to this size draw one offspring count per individual;
/// larger ones draw the multinomial vector of counts directly.
pub const PER_INDIVIDUAL_MAX: u64 = 256;

/// Per-generation data for both simulation routes.
#[derive(Debug, Clone)]
pub struct GenerationPlan {
    pub law: OffspringLaw,
    /// `g = f / f(1)`
    pub normalized: OffspringLaw,
    /// `log f(1)`
    pub log_total: f64,
}

impl GenerationPlan {
    pub fn new(law: OffspringLaw) -> Self {
        let normalized = law.normalize().expect("valid laws have f(1) > 0");
        let log_total = law.total_mass().ln();
        GenerationPlan { law, normalized, log_total }
    }
}

/// Outcome of one generation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Next(State),
    /// The population would exceed the cap.
    Overflow,
}

/// Sum of `z` independent draws from `law`, `Δ` if any draw is `Δ`.
pub fn step_direct<R: Rng + ?Sized>(law: &OffspringLaw, z: u64, cap: u64, rng: &mut R) -> Step {
    if z <= PER_INDIVIDUAL_MAX {
        let mut total: u64 = 0;
        for _ in 0..z {
            match law.sample(rng) {
                State::Delta => return Step::Next(State::Delta),
                State::Count(k) => total = total.saturating_add(k),
            }
        }
        return bounded(total, cap);
    }
    let delta = law.defect();
    if delta > 0.0 && binomial(z, delta, rng) > 0 {
        return Step::Next(State::Delta);
    }
    aggregate_proper(law, z, cap, rng)
}

/// Kill with probability `1 - f(1)^z`, otherwise evolve under `g`.
pub fn step_coupled<R: Rng + ?Sized>(plan: &GenerationPlan, z: u64, cap: u64, rng: &mut R) -> Step {
    if z == 0 {
        return Step::Next(State::Count(0));
    }
    let kill = -(z as f64 * plan.log_total).exp_m1();
    let u: f64 = rng.random();
    if u < kill {
        return Step::Next(State::Delta);
    }
    step_direct(&plan.normalized, z, cap, rng)
}

/// Total offspring of `z` individuals given that none drew `Δ`.
fn aggregate_proper<R: Rng + ?Sized>(law: &OffspringLaw, z: u64, cap: u64, rng: &mut R) -> Step {
    let total_mass = law.total_mass();
    if let Some((q, r, p)) = law.lf_params() {
        // nonzero counts are 1 + Geometric(1 - p); a sum of M of them is
        // M + NegBin(M, 1 - p), drawn as a Poisson-Gamma mixture
        let zero = ((q + r) / total_mass).min(1.0);
        let m = binomial(z, 1.0 - zero, rng);
        if m == 0 {
            return Step::Next(State::Count(0));
        }
        let lambda = Gamma::new(m as f64, p / (1.0 - p)).expect("positive shape").sample(rng);
        let extra = if lambda > 0.0 { Poisson::new(lambda).expect("positive rate").sample(rng) } else { 0.0 };
        return bounded_f64(m as f64 + extra, cap);
    }
    let w = law.weights().expect("finite-support law");
    let mut left = z;
    let mut mass_left = total_mass;
    let mut total: u128 = 0;
    for (k, &wk) in w.iter().enumerate() {
        if left == 0 {
            break;
        }
        let n_k = if k + 1 == w.len() { left } else { binomial(left, wk / mass_left, rng) };
        total += k as u128 * n_k as u128;
        left -= n_k;
        mass_left -= wk;
    }
    if total > cap as u128 {
        Step::Overflow
    } else {
        Step::Next(State::Count(total as u64))
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 || n == 0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
    }
}

fn bounded(total: u64, cap: u64) -> Step {
    if total > cap {
        Step::Overflow
    } else {
        Step::Next(State::Count(total))
    }
}

fn bounded_f64(total: f64, cap: u64) -> Step {
    if total > cap as f64 {
        Step::Overflow
    } else {
        Step::Next(State::Count(total as u64))
    }
}
