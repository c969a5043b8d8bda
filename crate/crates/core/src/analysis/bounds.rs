use serde::Serialize;

use super::{moments_in, profile_from_sweep};
use crate::environment::{compose_coeffs, DEFAULT_COEFF_BUDGET};
use crate::{Environment, Error, Result};

/// Relative slack on the inequality checks; the quantities compared are
/// computed independently and agree only up to rounding.
const REL_TOL: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * b.abs().max(a.abs())
}

/// The survival bounds `E[Z_n]²/E[Z_n²] ≤ P[τ_a > n] ≤ inf_{i≤n} μ_i` and
/// the two-sided bracket
/// `A + S/(2c) ≤ 1/P[τ_a > n] ≤ A + S` with `A = 1/E[Z_n]`,
/// `S = Σ_j f_j''(f_{j,n}(1)) / (f_j'(f_{j,n}(1)) μ_{j,n})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Report {
    pub n: usize,
    pub survival: f64,
    pub inf_mu_bound: f64,
    /// `E[Z_n]² / E[Z_n²]`
    pub moment_lb: f64,
    /// `c' E[Z_n]² / E[Z_n²]` with `c' = max(1, 2 c_used)`
    pub moment_ub: f64,
    pub eq17_lhs: f64,
    pub inv_survival: f64,
    pub eq17_rhs: f64,
    /// Largest per-generation `c12` on generations `1..=n`.
    pub c_used: f64,
    pub c_prime: f64,
    /// Smallest `c'` that works at this `n`: `P[τ_a > n] E[Z_n²] / E[Z_n]²`.
    pub c_prime_empirical: f64,
    pub holds: bool,
}

pub fn prop2_bounds(env: &Environment, n: usize) -> Result<Prop2Report> {
    let window = env.window(n);
    let m = moments_in(&window, n)?;
    let sweep = window.sweep(n)?;
    let survival = profile_from_sweep(&sweep).survival;

    let mut log_mu = 0.0;
    let mut inf_log_mu = f64::INFINITY;
    let mut c_used: f64 = 0.0;
    for law in window.laws() {
        log_mu += law.mean().ln();
        inf_log_mu = inf_log_mu.min(log_mu);
        c_used = c_used.max(law.regularity_exact().c12);
    }
    let inf_mu_bound = inf_log_mu.exp();

    let a = (-m.log_mean).exp();
    let s = m.curvature_sum;
    let eq17_lhs = if s > 0.0 { a + s / (2.0 * c_used) } else { a };
    let eq17_rhs = a + s;
    let moment_lb = 1.0 / m.second_moment_ratio;
    let c_prime = (2.0 * c_used).max(1.0);
    let inv_survival = (-sweep.log_survival()).exp();

    let holds = le(moment_lb, survival)
        && le(survival, inf_mu_bound)
        && le(survival, c_prime * moment_lb)
        && le(eq17_lhs, inv_survival)
        && le(inv_survival, eq17_rhs);

    Ok(Prop2Report {
        n,
        survival,
        inf_mu_bound,
        moment_lb,
        moment_ub: c_prime * moment_lb,
        eq17_lhs,
        inv_survival,
        eq17_rhs,
        c_used,
        c_prime,
        c_prime_empirical: survival * m.second_moment_ratio,
        holds,
    })
}

/// `E[Z_n | τ_a > n]` against the bound
/// `1 + c f_n'(1) Σ_{j<n} β^j (1 + f_{n-j}''(1)/f_{n-j}'(1))`,
/// `c = 1/(e α² β log β⁻¹)`, `α = inf f_i(0)`, `β = sup f_i(1)` over `i ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondMeanReport {
    pub n: usize,
    /// `Σ_{k≥1} k P[Z_n = k] / P[τ_a > n]` from the coefficient expansion.
    pub exact: f64,
    /// `E[Z_n] / P[τ_a > n]` from the chain rule.
    pub exact_from_derivative: f64,
    pub thm4_bound: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    /// Truncation degree reached by the adaptive expansion.
    pub truncation: usize,
    pub holds: bool,
}

/// Relative tail mass below which the coefficient expansion is accepted.
const COND_MEAN_TAIL_REL: f64 = 1e-10;

pub fn conditional_mean(env: &Environment, n: usize) -> Result<CondMeanReport> {
    if n == 0 {
        return Err(Error::arg("conditional mean needs n ≥ 1"));
    }
    let window = env.window(n);
    let alpha = window.laws().iter().map(|f| f.mass(0)).fold(f64::INFINITY, f64::min);
    let beta = window.laws().iter().map(|f| f.total_mass()).fold(0.0, f64::max);
    if alpha <= 0.0 {
        return Err(Error::pre(format!("inf f_n(0) = {alpha}; the bound needs a positive infimum")));
    }
    if beta >= 1.0 {
        return Err(Error::pre("sup f_n(1) = 1; the bound needs a uniform defect"));
    }
    let c = 1.0 / (std::f64::consts::E * alpha * alpha * beta * (1.0 / beta).ln());
    let last = window.law(n);
    let series: f64 = (0..n)
        .map(|j| {
            let f = window.law(n - j);
            beta.powi(j as i32) * (1.0 + f.pgf_d2(1.0) / f.pgf_d1(1.0))
        })
        .sum();
    let thm4_bound = 1.0 + c * last.mean() * series;

    let sweep = window.sweep(n)?;
    let survival = sweep.survival();
    let m = moments_in(&window, n)?;
    let exact_from_derivative = (m.log_mean - sweep.log_survival()).exp();

    let mut d = 16;
    let dist = loop {
        let dv = compose_coeffs(&window, n, d, DEFAULT_COEFF_BUDGET)?;
        if dv.tail_mass <= COND_MEAN_TAIL_REL * survival {
            break dv;
        }
        d *= 2;
    };
    let exact = dist.moment(1) / survival;
    Ok(CondMeanReport {
        n,
        exact,
        exact_from_derivative,
        thm4_bound,
        alpha,
        beta,
        c,
        truncation: d,
        holds: le(exact, thm4_bound),
    })
}

/// Extinction and graveyard tails after generation `n` against the bounds
/// `P[n < τ_0 < ∞] ≤ σ Π f_i'(σ)` and
/// `P[n < τ_Δ < ∞] ≥ (1 - σ) Π f_i'(f_{i,n}(σ))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionTail {
    pub n: usize,
    pub sigma: f64,
    pub upper: f64,
    pub lower: f64,
    /// `f_{0,N}(0) - f_{0,n}(0)`
    pub exact_ext_tail: f64,
    /// `f_{0,n}(1) - f_{0,N}(1)`
    pub exact_delta_tail: f64,
    /// Proxy for `∞`.
    pub proxy_horizon: usize,
    /// `q_l ≈ f_{l,N}(0)` for `l = 0..=n`.
    pub q: Vec<f64>,
    pub upper_holds: bool,
    pub lower_holds: bool,
    pub q_below_sigma: bool,
}

const CAUCHY_TOL: f64 = 1e-10;
const MAX_PROXY_HORIZON: usize = 1 << 20;

pub fn extinction_tail(env: &Environment, sigma: f64, n: usize) -> Result<ExtinctionTail> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::arg(format!("σ = {sigma} not in (0, 1)")));
    }
    let mut big_n = (2 * n).max(64);
    let mut prev: Option<(f64, f64)> = None;
    let window = loop {
        let window = env.window(big_n);
        let (z, o) = (window.compose_all(0, big_n, 0.0)?.0, window.compose_all(0, big_n, 1.0)?.0);
        if let Some((pz, po)) = prev {
            if (z - pz).abs() < CAUCHY_TOL && (o - po).abs() < CAUCHY_TOL {
                break window;
            }
        }
        if big_n >= MAX_PROXY_HORIZON {
            return Err(Error::Budget(format!("tails not settled by horizon {big_n}")));
        }
        prev = Some((z, o));
        big_n *= 2;
    };
    if let Some(i) = (1..=big_n).find(|&i| window.law(i).pgf(sigma) > sigma) {
        return Err(Error::pre(format!("f_{i}(σ) > σ for σ = {sigma}; σ is not an upper bracket")));
    }

    let upper = sigma * window.laws()[..n].iter().map(|f| f.pgf_d1(sigma)).product::<f64>();
    let at_sigma = window.values(0, n, sigma)?;
    let lower = (1.0 - sigma) * (1..=n).map(|i| window.law(i).pgf_d1(at_sigma[i])).product::<f64>();

    let q_full = window.values(0, big_n, 0.0)?;
    let q: Vec<f64> = q_full[..=n].to_vec();
    let ext_n = window.compose_all(0, n, 0.0)?.0;
    let one_n = window.compose_all(0, n, 1.0)?.0;
    let one_big = window.compose_all(0, big_n, 1.0)?.0;
    let exact_ext_tail = q_full[0] - ext_n;
    let exact_delta_tail = one_n - one_big;

    Ok(ExtinctionTail {
        n,
        sigma,
        upper,
        lower,
        exact_ext_tail,
        exact_delta_tail,
        proxy_horizon: big_n,
        upper_holds: exact_ext_tail <= upper + CAUCHY_TOL,
        // the proxy underestimates the Δ tail by at most the Cauchy increment
        lower_holds: exact_delta_tail + 2.0 * CAUCHY_TOL >= lower,
        q_below_sigma: q.iter().all(|&x| x <= sigma),
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::OffspringLaw;

    fn env_a() -> Environment {
        Environment::constant(OffspringLaw::binary(0.45, 0.0, 0.45).unwrap())
    }

    fn env_b() -> Environment {
        Environment::constant(OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap())
    }

    #[test]
    fn prop2_examples() {
        let r = prop2_bounds(&env_a(), 2).unwrap();
        assert!((r.survival - 0.273375).abs() < 1e-15);
        assert!((r.inf_mu_bound - 0.81).abs() < 1e-15);
        assert!(r.moment_lb <= r.survival);
        assert!(r.holds);

        let id = prop2_bounds(&Environment::identity(), 5).unwrap();
        assert_eq!(id.survival, 1.0);
        assert_eq!(id.inf_mu_bound, 1.0);
        assert_eq!(id.eq17_lhs, id.eq17_rhs);
        assert!(id.holds);

        assert!(prop2_bounds(&env_b(), 3).unwrap().holds);
    }

    #[test]
    fn cond_mean_examples() {
        let r = conditional_mean(&env_a(), 1).unwrap();
        assert!((r.exact - 2.0).abs() < 1e-14);
        assert!((r.c - 19.16).abs() < 0.01);
        assert!(r.holds);
        let r40 = conditional_mean(&env_a(), 40).unwrap();
        assert!((r40.exact - r40.exact_from_derivative).abs() < 1e-8 * r40.exact);
        assert!(matches!(conditional_mean(&Environment::identity(), 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn extinction_tail_examples() {
        let theta = OffspringLaw::binary(0.45, 0.0, 0.45).unwrap().fixed_point().unwrap();
        let r = extinction_tail(&env_a(), theta, 5).unwrap();
        assert!((r.upper - theta * (0.9 * theta).powi(5)).abs() < 1e-14);
        assert!(r.upper_holds && r.lower_holds && r.q_below_sigma);

        let tb = OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap().fixed_point().unwrap();
        let rb = extinction_tail(&env_b(), tb, 10).unwrap();
        assert!(rb.upper_holds && rb.lower_holds);

        assert!(matches!(extinction_tail(&env_a(), 0.3, 5), Err(Error::Precondition(_))));
    }
}
