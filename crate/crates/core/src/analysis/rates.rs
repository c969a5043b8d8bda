use serde::Serialize;

use super::moments_in;
use crate::{Environment, Error, Result};

/// A bracket `[ρ, σ]` for the fixed points over a window of generations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub rho: f64,
    /// `None` when only the lower end could be established.
    pub sigma: Option<f64>,
    /// `(n, θ_n)` for each generation in the window.
    pub witnesses: Vec<(usize, Option<f64>)>,
    /// `"fixed_points"` or `"min_f0"`.
    pub source: &'static str,
}

/// `ρ = min θ_n` and `σ = max θ_n` over `n0 ≤ n ≤ N` when every law there has
/// a fixed point in `(0, 1)`. Otherwise `ρ = inf f_n[0]` if that is
/// positive (then `f_n(ρ) ≥ f_n[0] ≥ ρ`), with no upper end.
pub fn rho_sigma(env: &Environment, n0: usize, big_n: usize) -> Result<Bracket> {
    if n0 == 0 || n0 > big_n {
        return Err(Error::arg(format!("window [{n0}, {big_n}] is empty or starts at 0")));
    }
    let witnesses: Vec<(usize, Option<f64>)> = (n0..=big_n).map(|n| (n, env.law(n).fixed_point())).collect();
    if witnesses.iter().all(|(_, t)| t.is_some()) {
        let thetas = witnesses.iter().map(|(_, t)| t.unwrap());
        let rho = thetas.clone().fold(f64::INFINITY, f64::min);
        let sigma = thetas.fold(0.0, f64::max);
        return Ok(Bracket { rho, sigma: Some(sigma), witnesses, source: "fixed_points" });
    }
    let min_f0 = (n0..=big_n).map(|n| env.law(n).mass(0)).fold(f64::INFINITY, f64::min);
    if min_f0 > 0.0 {
        return Ok(Bracket { rho: min_f0, sigma: None, witnesses, source: "min_f0" });
    }
    Err(Error::pre(format!(
        "bracket unavailable on [{n0}, {big_n}]: some law has no fixed point in (0, 1) and f_n[0] = 0"
    )))
}

/// The four normalized quantities whose liminf/limsup the rate theorem
/// controls, each evaluated at a single `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem3Rates {
    pub n: usize,
    /// `E[Z_n] / μ_n(ρ)`
    pub ratio_mean_rho: f64,
    /// `ν_n(ρ) P[τ_a > n]`
    pub tail_product_rho: f64,
    /// `E[Z_n] / μ_n(σ + ε)`
    pub ratio_mean_sigma_eps: f64,
    /// `ν_n(σ + ε) P[τ_a > n]`
    pub tail_product_sigma_eps: f64,
}

pub fn theorem3_rates(env: &Environment, rho: f64, sigma: f64, eps: f64, n: usize) -> Result<Theorem3Rates> {
    if !(0.0 < rho && rho <= sigma && eps > 0.0 && sigma + eps < 1.0) {
        return Err(Error::arg(format!(
            "need 0 < ρ ≤ σ < σ + ε < 1, got ρ = {rho}, σ = {sigma}, ε = {eps}"
        )));
    }
    let window = env.window(n);
    let m = moments_in(&window, n)?;
    let log_surv = window.sweep(n)?.log_survival();
    let at_rho = window.mu_profile(n, rho)?;
    let at_sig = window.mu_profile(n, sigma + eps)?;
    Ok(Theorem3Rates {
        n,
        ratio_mean_rho: (m.log_mean - at_rho.log_mu_n_at_s).exp(),
        tail_product_rho: (at_rho.log_nu_n_at_s + log_surv).exp(),
        ratio_mean_sigma_eps: (m.log_mean - at_sig.log_mu_n_at_s).exp(),
        tail_product_sigma_eps: (at_sig.log_nu_n_at_s + log_surv).exp(),
    })
}

/// `(1/n) log E[Z_n]` and `(1/n) log P[τ_a > n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRate {
    pub n: usize,
    pub rate_mean: f64,
    pub rate_survival: f64,
}

pub fn growth_rate(env: &Environment, n: usize) -> Result<GrowthRate> {
    let window = env.window(n);
    let m = moments_in(&window, n)?;
    let log_surv = window.sweep(n)?.log_survival();
    if !log_surv.is_finite() {
        return Err(Error::pre(format!("log P[τ_a > {n}] is not finite")));
    }
    Ok(GrowthRate { n, rate_mean: m.log_mean / n as f64, rate_survival: log_surv / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::OffspringLaw;

    fn law_a() -> OffspringLaw {
        OffspringLaw::binary(0.45, 0.0, 0.45).unwrap()
    }

    fn law_b() -> OffspringLaw {
        OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap()
    }

    #[test]
    fn brackets() {
        let c = rho_sigma(&Environment::constant(law_a()), 1, 10).unwrap();
        assert_eq!(Some(c.rho), c.sigma);
        assert!((c.rho - 0.626789).abs() < 1e-6);
        let alt = Environment::periodic(vec![law_a(), law_b()]).unwrap();
        let b = rho_sigma(&alt, 1, 10).unwrap();
        assert!((b.rho - 0.626789).abs() < 1e-6);
        assert!((b.sigma.unwrap() - 0.729844).abs() < 1e-6);
        assert!(matches!(rho_sigma(&Environment::identity(), 1, 10), Err(Error::Precondition(_))));
    }

    #[test]
    fn identity_rates() {
        let r = theorem3_rates(&Environment::identity(), 0.5, 0.5, 0.1, 12).unwrap();
        assert_eq!(r.ratio_mean_rho, 1.0);
        assert!((r.tail_product_rho - 12.0).abs() < 1e-12);
        let g = growth_rate(&Environment::identity(), 9).unwrap();
        assert_eq!((g.rate_mean, g.rate_survival), (0.0, 0.0));
        assert!(theorem3_rates(&Environment::identity(), 0.6, 0.5, 0.1, 3).is_err());
    }

    #[test]
    fn law_a_mean_rate() {
        let theta = law_a().fixed_point().unwrap();
        let g = growth_rate(&Environment::constant(law_a()), 500).unwrap();
        assert!((g.rate_mean - (0.9 * theta).ln()).abs() < 0.02);
        assert!(g.rate_survival < 0.0);
    }
}
