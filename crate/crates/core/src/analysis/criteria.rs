use serde::Serialize;

use crate::environment::compose::log_add_exp;
use crate::environment::Verdict;
use crate::{Environment, Error, Result};

/// Default horizons at which partial sums are reported.
pub const SERIES_HORIZONS: [usize; 4] = [100, 1_000, 10_000, 100_000];

const CONVERGE_SLOPE: f64 = -1.15;
const DIVERGE_SLOPE: f64 = -0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `Σ (1 - f_n[1]) < ∞`
    OneMinusF1,
    /// `inf μ_n > 0`
    InfMu,
    /// `Σ δ_n μ_{n-1} < ∞`
    DeltaMu,
    /// `Σ f_n''(1) / (f_n'(1) μ_n) < ∞`
    Curvature,
    /// `sup_n c8(f_n) < ∞`
    C8Sup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub criterion: Criterion,
    /// `(horizon, log partial sum)`; for `InfMu` and `C8Sup` the running
    /// `log inf μ_i` and `sup c8`.
    pub partial_sums: Vec<(usize, f64)>,
    /// Log-log slope of the per-index increment over the top two decades.
    pub growth_diagnostic: Option<f64>,
    pub verdict: Verdict,
    /// The verdict came from the environment's analytic tail metadata.
    pub analytic: bool,
}

/// Classify `Σ a_n` from `log a_n`, `n = 1..=N`.
///
/// `horizons` split `1..=N` into decades; the mean increment per index over
/// the last two decades gives a log-log slope. Summable power laws have
/// slope below `-1`, so slopes under `-1.15` count as convergent and slopes
/// above `-0.85` with a growing partial sum as divergent.
pub fn classify_series(log_terms: &[f64], horizons: &[usize]) -> (Vec<(usize, f64)>, Option<f64>, Verdict) {
    let mut partial = Vec::with_capacity(horizons.len());
    let mut acc = f64::NEG_INFINITY;
    let mut decade_logs = Vec::with_capacity(horizons.len());
    let mut start = 0usize;
    for &h in horizons {
        let mut block = f64::NEG_INFINITY;
        for &t in &log_terms[start..h] {
            block = log_add_exp(block, t);
        }
        acc = log_add_exp(acc, block);
        partial.push((h, acc));
        // mean increment per index and a representative index for the decade
        let mean = block - ((h - start) as f64).ln();
        let mid = (((start.max(1)) as f64) * h as f64).sqrt();
        decade_logs.push((mid.ln(), mean, block));
        start = h;
    }
    if decade_logs.len() < 2 {
        return (partial, None, Verdict::Inconclusive);
    }
    let (x0, y0, _) = decade_logs[decade_logs.len() - 2];
    let (x1, y1, last_block) = decade_logs[decade_logs.len() - 1];
    if last_block == f64::NEG_INFINITY {
        // increments have stopped entirely
        return (partial, None, Verdict::Converges);
    }
    if y0 == f64::NEG_INFINITY {
        return (partial, None, Verdict::Inconclusive);
    }
    let slope = (y1 - y0) / (x1 - x0);
    let verdict = if slope < CONVERGE_SLOPE {
        Verdict::Converges
    } else if slope > DIVERGE_SLOPE && last_block > f64::NEG_INFINITY {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    (partial, Some(slope), verdict)
}

/// Verdicts for the series and sequences in the absorption criteria,
/// evaluated up to the largest horizon. Analytic tail metadata, when the
/// environment carries it, decides the verdict.
pub fn theorem_checks(env: &Environment, horizons: &[usize]) -> Result<Vec<ConditionVerdict>> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(Error::arg("horizons must be nonempty, positive and increasing"));
    }
    let big_n = *horizons.last().unwrap();
    let meta = env.tail_meta().unwrap_or_default();

    let mut t1 = Vec::with_capacity(big_n);
    let mut t_delta = Vec::with_capacity(big_n);
    let mut t_curv = Vec::with_capacity(big_n);
    let mut log_mu_running = Vec::with_capacity(big_n);
    let mut c8_running = Vec::with_capacity(big_n);
    let mut log_mu = 0.0;
    let mut c8_sup: f64 = 0.0;
    for n in 1..=big_n {
        let f = env.law(n);
        t1.push((1.0 - f.mass(1)).ln());
        // δ_n μ_{n-1}
        t_delta.push(f.defect().ln() + log_mu);
        let m = f.mean();
        log_mu += m.ln();
        t_curv.push(f.pgf_d2(1.0).ln() - m.ln() - log_mu);
        log_mu_running.push(log_mu);
        c8_sup = c8_sup.max(f.regularity_exact().c8);
        c8_running.push(c8_sup);
    }

    let mut out = Vec::with_capacity(5);
    for (criterion, terms, analytic) in [
        (Criterion::OneMinusF1, &t1, meta.one_minus_f1),
        (Criterion::DeltaMu, &t_delta, meta.delta_mu),
        (Criterion::Curvature, &t_curv, meta.curvature),
    ] {
        let (partial_sums, slope, numeric) = classify_series(terms, horizons);
        out.push(ConditionVerdict {
            criterion,
            partial_sums,
            growth_diagnostic: slope,
            verdict: analytic.unwrap_or(numeric),
            analytic: analytic.is_some(),
        });
    }

    let inf_at = |h: usize| log_mu_running[..h].iter().copied().fold(f64::INFINITY, f64::min);
    let partial: Vec<(usize, f64)> = horizons.iter().map(|&h| (h, inf_at(h))).collect();
    let numeric_mu = sequence_floor_verdict(&partial);
    out.insert(
        1,
        ConditionVerdict {
            criterion: Criterion::InfMu,
            partial_sums: partial,
            growth_diagnostic: None,
            verdict: meta.inf_mu.unwrap_or(numeric_mu),
            analytic: meta.inf_mu.is_some(),
        },
    );

    let partial: Vec<(usize, f64)> = horizons.iter().map(|&h| (h, c8_running[h - 1])).collect();
    let numeric_c8 = sequence_ceiling_verdict(&partial);
    out.push(ConditionVerdict {
        criterion: Criterion::C8Sup,
        partial_sums: partial,
        growth_diagnostic: None,
        verdict: if meta.c8_sup.is_some() { Verdict::Bounded } else { numeric_c8 },
        analytic: meta.c8_sup.is_some(),
    });
    Ok(out)
}

/// `inf μ_n` from the running minimum of `log μ_i` at the horizons: a
/// minimum that has stopped moving over the last decade counts as positive,
/// one still falling by a power of `n` as vanishing.
fn sequence_floor_verdict(running: &[(usize, f64)]) -> Verdict {
    if running.len() < 2 {
        return Verdict::Inconclusive;
    }
    let (h0, m0) = running[running.len() - 2];
    let (h1, m1) = running[running.len() - 1];
    if m1 == f64::NEG_INFINITY {
        return Verdict::Vanishes;
    }
    let drop = m0 - m1;
    if drop <= 1e-3 {
        Verdict::Positive
    } else if drop / ((h1 as f64).ln() - (h0 as f64).ln()) > 0.15 {
        Verdict::Vanishes
    } else {
        Verdict::Inconclusive
    }
}

fn sequence_ceiling_verdict(running: &[(usize, f64)]) -> Verdict {
    if running.len() < 2 {
        return Verdict::Inconclusive;
    }
    let prev = running[running.len() - 2].1;
    let last = running[running.len() - 1].1;
    if !last.is_finite() {
        Verdict::Unbounded
    } else if last <= prev * (1.0 + 1e-3) {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Family;

    fn verdict(rows: &[ConditionVerdict], c: Criterion) -> &ConditionVerdict {
        rows.iter().find(|r| r.criterion == c).unwrap()
    }

    #[test]
    fn heuristic_classifies_power_laws() {
        let h = [100, 1000, 10_000];
        let terms = |p: f64| (1..=10_000).map(|n| -p * (n as f64).ln()).collect::<Vec<_>>();
        assert_eq!(classify_series(&terms(2.0), &h).2, Verdict::Converges);
        assert_eq!(classify_series(&terms(0.5), &h).2, Verdict::Diverges);
        assert_eq!(classify_series(&terms(1.0), &h).2, Verdict::Inconclusive);
        let zeros = vec![f64::NEG_INFINITY; 10_000];
        assert_eq!(classify_series(&zeros, &h).2, Verdict::Converges);
        let geometric: Vec<f64> = (1..=10_000).map(|n| -(n as f64) * 2f64.ln()).collect();
        assert_eq!(classify_series(&geometric, &h).2, Verdict::Converges);
    }

    #[test]
    fn named_examples_follow_metadata() {
        let h = [100, 1000];
        let rows = theorem_checks(&Environment::named(Family::Example1a).unwrap(), &h).unwrap();
        assert_eq!(verdict(&rows, Criterion::OneMinusF1).verdict, Verdict::Diverges);
        assert!(verdict(&rows, Criterion::OneMinusF1).analytic);
        let rows = theorem_checks(&Environment::named(Family::Example1b).unwrap(), &h).unwrap();
        assert_eq!(verdict(&rows, Criterion::OneMinusF1).verdict, Verdict::Converges);
        let rows = theorem_checks(&Environment::named(Family::Example2a).unwrap(), &h).unwrap();
        assert_eq!(verdict(&rows, Criterion::DeltaMu).verdict, Verdict::Diverges);
        let rows = theorem_checks(&Environment::named(Family::Example2b).unwrap(), &h).unwrap();
        for c in [Criterion::InfMu, Criterion::DeltaMu, Criterion::Curvature, Criterion::C8Sup] {
            assert!(verdict(&rows, c).verdict.holds(), "{c:?}");
        }
    }

    #[test]
    fn numeric_path_without_metadata() {
        // periodic environments carry no metadata
        let a = crate::OffspringLaw::binary(0.45, 0.0, 0.45).unwrap();
        let env = Environment::periodic(vec![a.clone(), a]).unwrap();
        let rows = theorem_checks(&env, &[100, 1000, 10_000]).unwrap();
        assert!(rows.iter().all(|r| !r.analytic));
        assert_eq!(verdict(&rows, Criterion::OneMinusF1).verdict, Verdict::Diverges);
        assert_eq!(verdict(&rows, Criterion::InfMu).verdict, Verdict::Vanishes);
        assert_eq!(verdict(&rows, Criterion::C8Sup).verdict, Verdict::Bounded);
    }

    #[test]
    fn rejects_bad_horizons() {
        let env = Environment::identity();
        assert!(theorem_checks(&env, &[]).is_err());
        assert!(theorem_checks(&env, &[100, 10]).is_err());
    }
}
