//! Exact moments, absorption probabilities, bounds and absorption criteria.
//!
//! Everything here is computed from one innermost-first sweep over the
//! generations (see [`Sweep`](crate::environment::Sweep)), so the bounds
//! and the quantities they bound share the same intermediate values.

mod bounds;
mod criteria;
mod rates;

pub use bounds::{conditional_mean, extinction_tail, prop2_bounds, CondMeanReport, ExtinctionTail, Prop2Report};
pub use criteria::{classify_series, theorem_checks, ConditionVerdict, Criterion, SERIES_HORIZONS};
pub use rates::{growth_rate, rho_sigma, theorem3_rates, Bracket, GrowthRate, Theorem3Rates};

pub use crate::environment::Verdict;

use serde::Serialize;

use crate::environment::{Sweep, Window};
use crate::{Environment, Error, Result};

/// Absorption probabilities by generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionProfile {
    pub n: usize,
    /// `P[τ_0 ≤ n] = f_{0,n}(0)`
    pub p_ext: f64,
    /// `P[τ_Δ ≤ n] = 1 - f_{0,n}(1)`
    pub p_delta: f64,
    /// `P[τ_a ≤ n]`
    pub p_abs: f64,
    /// `P[τ_a > n]`
    pub survival: f64,
    pub log_survival: f64,
}

/// `E[Z_n]` and `E[Z_n²]`, both restricted to `Z_n ≠ Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub log_mean: f64,
    /// `E[Z_n²] / E[Z_n]²`
    pub second_moment_ratio: f64,
    pub second_moment: f64,
    /// `Σ_j f_j''(f_{j,n}(1)) / (f_j'(f_{j,n}(1)) μ_{j,n})`
    pub curvature_sum: f64,
}

pub fn absorption_profile(env: &Environment, n: usize) -> Result<AbsorptionProfile> {
    let sweep = env.window(n).sweep(n)?;
    Ok(profile_from_sweep(&sweep))
}

pub(crate) fn profile_from_sweep(sweep: &Sweep) -> AbsorptionProfile {
    let p_ext = sweep.at_zero(0);
    let p_delta = 1.0 - sweep.at_one(0);
    AbsorptionProfile {
        n: sweep.horizon(),
        p_ext,
        p_delta,
        p_abs: p_ext + p_delta,
        survival: sweep.survival(),
        log_survival: sweep.log_survival(),
    }
}

pub fn moments(env: &Environment, n: usize) -> Result<Moments> {
    moments_in(&env.window(n), n)
}

pub(crate) fn moments_in(window: &Window, n: usize) -> Result<Moments> {
    if n == 0 {
        return Err(Error::arg("moments need n ≥ 1"));
    }
    let at_one = window.values(0, n, 1.0)?;
    let mut log_ladder = 0.0;
    let mut curvature_sum = 0.0;
    for j in 1..=n {
        let f = window.law(j);
        let t = at_one[j];
        let d1 = f.pgf_d1(t);
        log_ladder += d1.ln();
        let d2 = f.pgf_d2(t);
        if d2 > 0.0 {
            curvature_sum += (d2.ln() - d1.ln() - log_ladder).exp();
        }
    }
    let mean = log_ladder.exp();
    let ratio = (-log_ladder).exp() + curvature_sum;
    Ok(Moments {
        n,
        mean,
        log_mean: log_ladder,
        second_moment_ratio: ratio,
        second_moment: ratio * mean * mean,
        curvature_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::OffspringLaw;

    fn env_a() -> Environment {
        Environment::constant(OffspringLaw::binary(0.45, 0.0, 0.45).unwrap())
    }

    #[test]
    fn moments_examples() {
        let m = moments(&env_a(), 1).unwrap();
        assert!((m.mean - 0.9).abs() < 1e-15);
        assert!((m.second_moment_ratio - 20.0 / 9.0).abs() < 1e-14);
        assert!((m.second_moment - 1.8).abs() < 1e-14);

        let id = moments(&Environment::identity(), 7).unwrap();
        assert_eq!((id.mean, id.second_moment_ratio, id.second_moment), (1.0, 1.0, 1.0));

        let m2 = moments(&env_a(), 2).unwrap();
        assert!((m2.mean - 0.729).abs() < 1e-15);
        let dv = env_a().compose_coeffs(2, 4).unwrap();
        assert!((m2.second_moment - dv.moment(2)).abs() < 1e-12);
    }

    #[test]
    fn absorption_examples() {
        let p = absorption_profile(&env_a(), 1).unwrap();
        assert!((p.p_ext - 0.45).abs() < 1e-15);
        assert!((p.p_delta - 0.1).abs() < 1e-15);
        assert!((p.survival - 0.45).abs() < 1e-15);

        let p0 = absorption_profile(&env_a(), 0).unwrap();
        assert_eq!((p0.p_ext, p0.p_delta, p0.survival), (0.0, 0.0, 1.0));

        let p2 = absorption_profile(&env_a(), 2).unwrap();
        assert!((p2.survival - 0.273375).abs() < 1e-15);
        assert!((p2.p_abs + p2.survival - 1.0).abs() < 1e-14);
    }
}
