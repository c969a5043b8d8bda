use serde::Serialize;

use crate::{Error, OffspringLaw, Result};

/// The laws `f_1..f_N` of an environment, materialized for repeated
/// composition.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    laws: Vec<OffspringLaw>,
}

/// Mean products of an environment up to generation `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuProfile {
    pub n: usize,
    pub s: f64,
    /// `μ_n = Π f_i'(1)`
    pub mu_n: f64,
    pub log_mu_n: f64,
    /// `μ_n(s) = Π f_i'(s)`
    pub mu_n_at_s: f64,
    pub log_mu_n_at_s: f64,
    /// `ν_n(s) = Σ_{i ≤ n} 1/μ_i(s)`
    pub nu_n_at_s: f64,
    pub log_nu_n_at_s: f64,
    /// `μ_{j,n} = Π_{i ≤ j} f_i'(f_{i,n}(1))` for `j = 0..=n`.
    pub ladder: Vec<f64>,
    pub log_ladder: Vec<f64>,
}

/// One innermost-first pass over generations `1..=n` caching `f_{i,n}(1)`,
/// `f_{i,n}(0)` and the log divided differences from which the survival
/// probability is assembled without cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    n: usize,
    at_one: Vec<f64>,
    at_zero: Vec<f64>,
    log_dq: Vec<f64>,
    // log_surv_from[l] = log P_{v_l}[τ_a > n - l]
    log_surv_from: Vec<f64>,
}

impl Sweep {
    pub fn horizon(&self) -> usize {
        self.n
    }

    /// `f_{i,n}(1)` for `0 ≤ i ≤ n`.
    pub fn at_one(&self, i: usize) -> f64 {
        self.at_one[i]
    }

    /// `f_{i,n}(0)` for `0 ≤ i ≤ n`.
    pub fn at_zero(&self, i: usize) -> f64 {
        self.at_zero[i]
    }

    /// `log [f_i(a) - f_i(b)]/(a - b)` at `a = f_{i,n}(1)`, `b = f_{i,n}(0)`, for `1 ≤ i ≤ n`.
    pub fn log_divided_difference(&self, i: usize) -> f64 {
        self.log_dq[i]
    }

    /// `log P[τ_a > n]`.
    pub fn log_survival(&self) -> f64 {
        self.log_surv_from[0]
    }

    pub fn survival(&self) -> f64 {
        self.log_surv_from[0].exp()
    }

    /// `log P_{v_l}[τ_a > n - l] = log (f_{l,n}(1) - f_{l,n}(0))`.
    pub fn log_survival_from(&self, l: usize) -> f64 {
        self.log_surv_from[l]
    }
}

impl Window {
    pub fn new(laws: Vec<OffspringLaw>) -> Self {
        Window { laws }
    }

    /// Number of materialized generations.
    pub fn horizon(&self) -> usize {
        self.laws.len()
    }

    /// `f_i` for `1 ≤ i ≤ horizon`.
    pub fn law(&self, i: usize) -> &OffspringLaw {
        &self.laws[i - 1]
    }

    pub fn laws(&self) -> &[OffspringLaw] {
        &self.laws
    }

    fn check_range(&self, k: usize, n: usize) -> Result<()> {
        if k > n {
            return Err(Error::arg(format!("k = {k} exceeds n = {n}")));
        }
        if n > self.laws.len() {
            return Err(Error::arg(format!(
                "horizon {n} beyond the {} materialized generations",
                self.laws.len()
            )));
        }
        Ok(())
    }

    /// `f_{i,n}(s)` for `i = k..=n`, indexed from `k`.
    pub fn values(&self, k: usize, n: usize, s: f64) -> Result<Vec<f64>> {
        self.check_range(k, n)?;
        let mut out = vec![0.0; n - k + 1];
        out[n - k] = s;
        let mut h = s;
        for i in (k + 1..=n).rev() {
            h = self.law(i).pgf(h);
            out[i - 1 - k] = h;
        }
        Ok(out)
    }

    /// `(f_{k,n}(s), f_{k,n}'(s), f_{k,n}''(s))` by the chain rule, applying
    /// `f_n` first.
    pub fn compose_all(&self, k: usize, n: usize, s: f64) -> Result<(f64, f64, f64)> {
        self.check_range(k, n)?;
        let (mut h, mut h1, mut h2) = (s, 1.0, 0.0);
        for i in (k + 1..=n).rev() {
            let f = self.law(i);
            let d1 = f.pgf_d1(h);
            let d2 = f.pgf_d2(h);
            h2 = d2 * h1 * h1 + d1 * h2;
            h1 *= d1;
            h = f.pgf(h);
        }
        Ok((h, h1, h2))
    }

    pub fn compose_eval(&self, k: usize, n: usize, s: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::arg(format!("s = {s} lies outside [0, 1]")));
        }
        let (h, h1, h2) = self.compose_all(k, n, s)?;
        match order {
            0 => Ok(h),
            1 => Ok(h1),
            2 => Ok(h2),
            _ => Err(Error::arg(format!("derivative order {order} not in {{0, 1, 2}}"))),
        }
    }

    pub fn sweep(&self, n: usize) -> Result<Sweep> {
        self.check_range(0, n)?;
        let mut at_one = vec![1.0; n + 1];
        let mut at_zero = vec![0.0; n + 1];
        let mut log_dq = vec![0.0; n + 1];
        let mut log_surv_from = vec![0.0; n + 1];
        for i in (1..=n).rev() {
            let f = self.law(i);
            let (a, b) = (at_one[i], at_zero[i]);
            log_dq[i] = f.divided_difference(a, b).ln();
            log_surv_from[i - 1] = log_surv_from[i] + log_dq[i];
            at_one[i - 1] = f.pgf(a);
            at_zero[i - 1] = f.pgf(b);
        }
        Ok(Sweep { n, at_one, at_zero, log_dq, log_surv_from })
    }

    pub fn mu_profile(&self, n: usize, s: f64) -> Result<MuProfile> {
        if n == 0 {
            return Err(Error::arg("mu_profile needs n ≥ 1"));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::arg(format!("s = {s} not in (0, 1]")));
        }
        let at_one = self.values(0, n, 1.0)?;
        let mut log_mu = 0.0;
        let mut log_mu_s = 0.0;
        let mut log_nu = f64::NEG_INFINITY;
        let mut log_ladder = Vec::with_capacity(n + 1);
        log_ladder.push(0.0);
        for i in 1..=n {
            let f = self.law(i);
            log_mu += f.pgf_d1(1.0).ln();
            log_mu_s += f.pgf_d1(s).ln();
            log_nu = log_add_exp(log_nu, -log_mu_s);
            log_ladder.push(log_ladder[i - 1] + f.pgf_d1(at_one[i]).ln());
        }
        Ok(MuProfile {
            n,
            s,
            mu_n: log_mu.exp(),
            log_mu_n: log_mu,
            mu_n_at_s: log_mu_s.exp(),
            log_mu_n_at_s: log_mu_s,
            nu_n_at_s: log_nu.exp(),
            log_nu_n_at_s: log_nu,
            ladder: log_ladder.iter().map(|x| x.exp()).collect(),
            log_ladder,
        })
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
