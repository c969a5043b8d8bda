//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgwve::analysis::{self, Criterion, Verdict, SERIES_HORIZONS};
use dgwve::environment::Family;
use dgwve::simulate::{self, Mode, SimOptions};
use dgwve::trees::{spine_dist, validate_prop4};
use dgwve::{Environment, OffspringLaw};

const THETA_A: f64 = 0.626789;
const THETA_B: f64 = 0.729844;
/// `(1/500) log P[τ_a > 500]` for the constant law A environment.
const RATE_SURVIVAL_A_500: f64 = -0.5723348603190092;
/// `max_{n ≤ 100} E[Z_n | τ_a > n]` for laws A and B.
const COND_MEAN_MAX_A: f64 = 4.317418967416453;
const COND_MEAN_MAX_B: f64 = 3.7015621187164123;

fn law_a() -> OffspringLaw {
    OffspringLaw::binary(0.45, 0.0, 0.45).unwrap()
}

fn law_b() -> OffspringLaw {
    OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap()
}

fn named(f: Family) -> Environment {
    Environment::named(f).unwrap()
}

/// Random finite law on `{0..=top}` with total mass in `[0.6, 1]`.
fn random_finite(rng: &mut ChaCha8Rng, top: usize) -> OffspringLaw {
    let raw: Vec<f64> = (0..=top).map(|_| rng.random::<f64>() + 0.01).collect();
    let mass = rng.random_range(0.6..=1.0);
    let sum: f64 = raw.iter().sum();
    OffspringLaw::finite(raw.iter().map(|w| w / sum * mass).collect()).unwrap()
}

fn random_env(rng: &mut ChaCha8Rng, n: usize) -> Environment {
    let laws = (0..n).map(|_| {
        let top = rng.random_range(1..=3);
        random_finite(rng, top)
    });
    Environment::prefix(laws.collect(), law_a())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn example_1b() -> Outcome {
    let env = named(Family::Example1b);
    let window = env.window(10_000);
    let mut worst: f64 = 0.0;
    for n in 1..=10_000 {
        let s = window.sweep(n).unwrap().survival();
        worst = worst.max((s - (n as f64 + 1.0) / (4.0 * n as f64)).abs());
    }
    let mc = simulate::monte_carlo(&env, 100, 100_000, Mode::Direct, 1, SimOptions::default()).unwrap();
    let z = (mc.survival.value - 0.2525).abs() / mc.survival.se;
    outcome(
        worst <= 1e-12 && z <= 4.0,
        format!("max |err| = {worst:.2e} (tol 1e-12); MC {:.5} ± {:.5}, {z:.2} SE (tol 4)", mc.survival.value, mc.survival.se),
    )
}

fn fixed_points() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut tested, mut with_root, mut worst, mut mismatched) = (0, 0, 0.0f64, 0);
    while tested < 1000 {
        let law = if tested % 2 == 0 {
            let f0 = rng.random_range(0.0..0.6);
            let f1 = rng.random_range(0.0..(1.0 - f0));
            let f2 = rng.random_range(0.0..=(1.0 - f0 - f1));
            OffspringLaw::binary(f0, f1, f2)
        } else {
            let p: f64 = rng.random_range(0.05..0.95);
            let r = rng.random_range(0.01..1.0) * (1.0 - p);
            let q = rng.random::<f64>() * (1.0 - r / (1.0 - p));
            OffspringLaw::linear_fractional(q, r, p)
        };
        let Ok(law) = law else { continue };
        tested += 1;
        match (law.fixed_point_closed_form().unwrap(), law.fixed_point_bisection()) {
            (Some(a), Some(b)) => {
                with_root += 1;
                worst = worst.max((a - b).abs());
            }
            (None, None) => {}
            _ => mismatched += 1,
        }
    }
    let ta = law_a().fixed_point().unwrap();
    let tb = law_b().fixed_point().unwrap();
    outcome(
        worst <= 1e-10 && mismatched == 0 && (ta - THETA_A).abs() <= 1e-6 && (tb - THETA_B).abs() <= 1e-6,
        format!(
            "{tested} laws, {with_root} with a root, max |closed - bisect| = {worst:.1e} (tol 1e-10), {mismatched} existence mismatches; θ_A = {ta:.6}, θ_B = {tb:.6} (tol 1e-6)"
        ),
    )
}

fn rates() -> Outcome {
    let g = analysis::growth_rate(&Environment::constant(law_a()), 500).unwrap();
    let target = (0.9 * law_a().fixed_point().unwrap()).ln();
    let dm = (g.rate_mean - target).abs();
    let ds = (g.rate_survival - RATE_SURVIVAL_A_500).abs();
    outcome(
        dm <= 0.02 && ds <= 1e-9,
        format!(
            "rate_mean = {:.5} vs log(0.9θ) = {target:.5} (tol 0.02); rate_survival = {:.10} vs locked {RATE_SURVIVAL_A_500:.10} (tol 1e-9)",
            g.rate_mean, g.rate_survival
        ),
    )
}

fn moments_vs_coeffs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let cases = 60;
    for i in 0..cases {
        let n = 1 + i % 8;
        let env = random_env(&mut rng, n);
        let m = analysis::moments(&env, n).unwrap();
        let d = env.compose_coeffs(n, 3usize.pow(n as u32)).unwrap();
        worst = worst.max(rel(m.mean, d.moment(1))).max(rel(m.second_moment, d.moment(2)));
    }
    outcome(worst <= 1e-10, format!("{cases} cases, max relative error {worst:.1e} (tol 1e-10)"))
}

fn prop2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cases, mut violations) = (0, 0);
    while cases < 250 {
        let n = rng.random_range(1..=12);
        let env = random_env(&mut rng, n);
        let r = analysis::prop2_bounds(&env, n).unwrap();
        if !r.c_used.is_finite() {
            continue;
        }
        cases += 1;
        let bracket = r.eq17_lhs <= r.inv_survival * (1.0 + 1e-12) && r.inv_survival <= r.eq17_rhs * (1.0 + 1e-12);
        let sides = r.moment_lb <= r.survival * (1.0 + 1e-12) && r.survival <= r.inf_mu_bound * (1.0 + 1e-12);
        if !(r.holds && bracket && sides) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{cases} (env, n) pairs, {violations} violations"))
}

fn theorem4() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, law, locked) in [("A", law_a(), COND_MEAN_MAX_A), ("B", law_b(), COND_MEAN_MAX_B)] {
        let env = Environment::constant(law);
        let mut max: f64 = 0.0;
        let mut broken = 0;
        for n in 1..=100 {
            let r = analysis::conditional_mean(&env, n).unwrap();
            if !(r.exact <= r.thm4_bound) {
                broken += 1;
            }
            max = max.max(r.exact);
        }
        ok &= broken == 0 && rel(max, locked) <= 1e-9;
        detail.push(format!("{name}: {broken} above bound, max {max:.6} vs locked {locked:.6} (tol 1e-9 rel)"));
    }
    outcome(ok, detail.join("; "))
}

fn coupling() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for env in [Environment::constant(law_a()), Environment::constant(law_b())] {
        for h in 1..=4 {
            let a = simulate::mode_agreement(&env, h, 100_000, 7 + h as u64, SimOptions::default()).unwrap();
            ok &= a.pass;
            worst = worst.max(a.tv_distance / a.threshold);
        }
    }
    outcome(ok, format!("8 (law, horizon) pairs at 1e5 reps per mode, max TV/threshold = {worst:.3}"))
}

fn spine_normalization() -> Outcome {
    let envs = [
        Environment::constant(law_a()),
        Environment::constant(law_b()),
        named(Family::Example1a),
        named(Family::Example1b),
        named(Family::Example2a),
        named(Family::Example2b),
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for env in &envs {
        for n in 1..=6 {
            for l in 1..=n {
                let g = spine_dist(env, l, n).unwrap();
                let sum: f64 = g.weights.iter().map(|w| w.1).sum();
                worst = worst.max((sum - 1.0).abs());
                count += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{count} (env, l, n) tables, max |Σg - 1| = {worst:.1e} (tol 1e-12)"))
}

fn prop4() -> Outcome {
    let a = validate_prop4(&Environment::constant(law_a()), 2, 100_000, 9).unwrap();
    let b_trunc = OffspringLaw::finite((0..=3).map(|k| law_b().mass(k)).collect()).unwrap();
    let b = validate_prop4(&Environment::constant(b_trunc), 2, 100_000, 10).unwrap();
    let tv_a = a.tv_vs_exact.unwrap();
    outcome(
        a.pass && tv_a <= 0.01 && b.pass,
        format!(
            "law A: TV exact {tv_a:.4} (tol 0.01), TV rejection {:.4}; truncated B: {} atoms, TV exact {:.4}, TV rejection {:.4} (threshold {:.4})",
            a.tv_sampler_vs_rejection,
            b.atoms,
            b.tv_vs_exact.unwrap_or(f64::NAN),
            b.tv_sampler_vs_rejection,
            b.threshold
        ),
    )
}

fn verdicts() -> Outcome {
    let check = |f: Family| analysis::theorem_checks(&named(f), &SERIES_HORIZONS).unwrap();
    let get = |rows: &[analysis::ConditionVerdict], c: Criterion| rows.iter().find(|r| r.criterion == c).unwrap().clone();
    let e1a = get(&check(Family::Example1a), Criterion::OneMinusF1);
    let e1b = get(&check(Family::Example1b), Criterion::OneMinusF1);
    let e2a = check(Family::Example2a);
    let e2b = check(Family::Example2b);
    let thm2 = [Criterion::InfMu, Criterion::DeltaMu, Criterion::Curvature];
    let ok_2a = !get(&e2a, Criterion::DeltaMu).verdict.holds()
        && get(&e2a, Criterion::InfMu).verdict.holds()
        && get(&e2a, Criterion::Curvature).verdict.holds();
    let ok_2b = thm2.iter().all(|&c| {
        let v = get(&e2b, c);
        v.verdict.holds() && v.analytic
    });
    outcome(
        e1a.verdict == Verdict::Diverges && e1b.verdict == Verdict::Converges && ok_2a && ok_2b,
        format!(
            "example-1a {:?}, example-1b {:?}, example-2a Σδμ {:?}, example-2b {:?}",
            e1a.verdict,
            e1b.verdict,
            get(&e2a, Criterion::DeltaMu).verdict,
            thm2.iter().map(|&c| get(&e2b, c).verdict).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dgwve");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["simulate", "--env", r#"{"kind":"named","id":"example-1b"}"#, "--horizon", "100", "--reps", "100000", "--seed", "1"],
        &[
            "agree",
            "--env",
            r#"{"kind":"constant","law":{"kind":"lf","q":0.1,"r":0.4,"p":0.5}}"#,
            "--horizon",
            "4",
            "--reps",
            "100000",
            "--seed",
            "3",
        ],
        &[
            "tree-validate",
            "--env",
            r#"{"kind":"constant","law":{"kind":"finite","weights":[0.45,0,0.45]}}"#,
            "--horizon",
            "2",
            "--samples",
            "20000",
            "--seed",
            "9",
        ],
        &[
            "tree-sample",
            "--env",
            r#"{"kind":"constant","law":{"kind":"finite","weights":[0.45,0,0.45]}}"#,
            "--horizon",
            "3",
            "--samples",
            "50",
            "--seed",
            "4",
        ],
    ];
    let mut compared = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for threads in [1, 4, 8] {
            let out = dir.path().join(format!("{}-{threads}", args[0]));
            let st = Command::new(bin)
                .args(args)
                .args(["--threads", &threads.to_string(), "--out"])
                .arg(&out)
                .output()
                .unwrap();
            if st.status.code() != Some(0) {
                return outcome(false, format!("{} exited with {:?}: {}", args[0], st.status, String::from_utf8_lossy(&st.stderr)));
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            return outcome(false, format!("{} artifacts differ across 1/4/8 threads", args[0]));
        }
        compared += 1;
    }
    outcome(true, format!("{compared} commands byte-identical across 1, 4 and 8 threads"))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("example-1b survival closed form", 10, example_1b),
        ("fixed points closed form vs bisection", 5, fixed_points),
        ("growth rates of constant law A", 1, rates),
        ("moments vs coefficient oracle", 30, moments_vs_coeffs),
        ("survival bounds and bracket", 60, prop2),
        ("conditional mean bound", 30, theorem4),
        ("direct and coupled agreement", 20, coupling),
        ("spine law normalization", 5, spine_normalization),
        ("spine sampler vs exact and rejection", 60, prop4),
        ("named example verdicts", 10, verdicts),
        ("determinism across threads", 120, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let ok = o.ok && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.2} s, limit {budget} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
