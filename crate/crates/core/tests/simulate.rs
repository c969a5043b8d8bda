use dgwve::simulate::{self, Mode, SimOptions, Terminal};
use dgwve::{analysis, Environment, OffspringLaw, State};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn law_a() -> Environment {
    Environment::constant(OffspringLaw::binary(0.45, 0.0, 0.45).unwrap())
}

fn law_b() -> Environment {
    Environment::constant(OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap())
}

fn opts(threads: usize) -> SimOptions {
    SimOptions { threads: Some(threads), ..SimOptions::default() }
}

#[test]
fn summaries_do_not_depend_on_threads() {
    for mode in [Mode::Direct, Mode::Coupled] {
        let one = simulate::monte_carlo(&law_b(), 6, 5_000, mode, 11, opts(1)).unwrap();
        for t in [4, 8] {
            assert_eq!(one, simulate::monte_carlo(&law_b(), 6, 5_000, mode, 11, opts(t)).unwrap());
        }
    }
}

#[test]
fn paths_are_reproducible_and_absorbing() {
    for r in 0..200 {
        let p = simulate::run_path(&law_a(), 8, Mode::Direct, 3, r);
        assert_eq!(p, simulate::run_path(&law_a(), 8, Mode::Direct, 3, r));
        assert_eq!(p.trajectory.len(), 9);
        assert_eq!(p.trajectory[0], State::Count(1));
        let first = p.trajectory.iter().position(|z| z.is_absorbed());
        if let Some(i) = first {
            assert!(p.trajectory[i..].iter().all(|z| *z == p.trajectory[i]));
        }
        match p.terminal {
            Terminal::Extinct { at } => assert_eq!(p.trajectory[at], State::Count(0)),
            Terminal::Absorbed { at } => assert_eq!(p.trajectory[at], State::Delta),
            Terminal::Alive { value } => assert_eq!(p.trajectory[8], State::Count(value)),
            Terminal::Overflow { .. } => panic!("no overflow at this size"),
        }
    }
}

#[test]
fn estimates_match_exact_absorption() {
    for env in [law_a(), law_b()] {
        for mode in [Mode::Direct, Mode::Coupled] {
            let mc = simulate::monte_carlo(&env, 5, 40_000, mode, 21, SimOptions::default()).unwrap();
            let exact = analysis::absorption_profile(&env, 5).unwrap();
            for (est, truth) in [(mc.survival, exact.survival), (mc.p_ext, exact.p_ext), (mc.p_delta, exact.p_delta)] {
                assert!((est.value - truth).abs() <= 4.0 * est.se.max(1e-3), "{mode:?}: {} vs {truth}", est.value);
            }
        }
    }
}

// terminal law against the coefficient oracle
#[test]
fn terminal_distribution_chi_square() {
    let env = law_a();
    let n = 3;
    let reps = 50_000u64;
    let d = env.compose_coeffs(n, 8).unwrap();
    let mc = simulate::monte_carlo(&env, n, reps, Mode::Direct, 5, SimOptions::default()).unwrap();
    let mut cells = vec![(mc.counts.extinct, d.probs[0]), (mc.counts.absorbed_delta, d.delta_mass)];
    for k in [2u64, 4, 6, 8] {
        cells.push((mc.histogram.get(&k).copied().unwrap_or(0), d.probs[k as usize]));
    }
    let observed: u64 = cells.iter().map(|c| c.0).sum();
    assert_eq!(observed, reps);
    let stat: f64 = cells
        .iter()
        .map(|&(o, p)| {
            let e = p * reps as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new((cells.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi2 {stat} ≥ {critical}");
}

#[test]
fn modes_agree_and_reject_zero_reps() {
    let a = simulate::mode_agreement(&law_b(), 3, 20_000, 8, SimOptions::default()).unwrap();
    assert!(a.pass, "{a:?}");
    assert!(!a.degenerate);
    assert!(simulate::monte_carlo(&law_b(), 3, 0, Mode::Direct, 1, SimOptions::default()).is_err());
}

#[test]
fn population_cap_reports_overflow() {
    let env = Environment::constant(OffspringLaw::finite(vec![0.0, 0.0, 0.0, 1.0]).unwrap());
    let o = SimOptions { threads: Some(1), population_cap: 100 };
    let mc = simulate::monte_carlo(&env, 10, 10, Mode::Direct, 1, o).unwrap();
    assert_eq!(mc.counts.overflow, 10);
}

fn named(json: &str) -> Environment {
    serde_json::from_str(json).unwrap()
}

// E[W̃_n] = 1 with W̃_n = Z̃_n Π f_i(1)/f_i'(1) and Z̃ driven by the normalized laws
#[test]
fn normalized_martingale_has_unit_mean() {
    for env in [law_a(), law_b(), named(r#"{"kind":"named","id":"example-2b"}"#)] {
        for n in [1, 5, 20] {
            let laws: Vec<OffspringLaw> = (1..=n).map(|i| env.law(i).normalize().unwrap()).collect();
            let scale: f64 = (1..=n).map(|i| env.law(i).total_mass() / env.law(i).mean()).product();
            let tilde = Environment::prefix(laws, OffspringLaw::identity());
            let mean = tilde.compose_eval(0, n, 1.0, 1).unwrap();
            assert!((mean * scale - 1.0).abs() < 1e-10, "n = {n}: {}", mean * scale);
        }
    }
}

#[test]
fn w_mean_matches_exact_ratio() {
    let env = named(r#"{"kind":"named","id":"example-2b"}"#);
    let n = 30;
    let mc = simulate::monte_carlo(&env, n, 100_000, Mode::Direct, 31, SimOptions::default()).unwrap();
    let exact = analysis::moments(&env, n).unwrap().mean / env.mu_profile(n, 1.0).unwrap().mu_n;
    assert!((mc.w_mean.value - exact).abs() <= 4.0 * mc.w_mean.se.max(1e-12), "{:?} vs {exact}", mc.w_mean);
}

fn w_at(p: &simulate::PathSample, n: usize, log_mu: &[f64]) -> Option<f64> {
    p.trajectory[n].count().map(|z| z as f64 * (-log_mu[n]).exp())
}

#[test]
fn w_is_positive_and_settles_on_survivors() {
    // example-2b has Z_n = 2^n on survival, so W_n is deterministic there
    let e2b = named(r#"{"kind":"named","id":"example-2b"}"#);
    let paths = simulate::run_paths(&e2b, 40, 2_000, Mode::Direct, 41, SimOptions::default()).unwrap();
    let alive: Vec<_> = paths.iter().filter(|p| matches!(p.terminal, Terminal::Alive { .. })).collect();
    assert!(!alive.is_empty());
    assert!(alive.iter().all(|p| p.w_at_horizon.unwrap() > 0.0));

    let decay = named(
        r#"{"kind":"named","id":"defect-decay","base":{"kind":"finite","weights":[0,0.25,0.5,0.25]},
            "scale":1,"exponent":2,"geometric":2}"#,
    );
    let log_mu: Vec<f64> = (0..=40)
        .map(|n| if n == 0 { 0.0 } else { decay.mu_profile(n, 1.0).unwrap().log_mu_n })
        .collect();
    let paths = simulate::run_paths(&decay, 40, 4_000, Mode::Direct, 42, SimOptions::default()).unwrap();
    let pairs: Vec<(f64, f64)> = paths
        .iter()
        .filter_map(|p| Some((w_at(p, 20, &log_mu)?, w_at(p, 40, &log_mu)?)))
        .filter(|&(_, w40)| w40 > 0.0)
        .collect();
    let alive40 = paths.iter().filter(|p| matches!(p.terminal, Terminal::Alive { .. })).count();
    assert_eq!(pairs.len(), alive40);
    let m = pairs.len() as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / m, pairs.iter().map(|p| p.1).sum::<f64>() / m);
    let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
    let va: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
    let vb: f64 = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum();
    let corr = cov / (va * vb).sqrt();
    assert!(corr > 0.9, "correlation {corr}");
}
