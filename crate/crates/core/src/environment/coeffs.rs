use serde::Serialize;

use super::Window;
use crate::{Error, OffspringLaw, Result};

/// Default ceiling on `(D + 1) · n` for [`compose_coeffs`].
pub const DEFAULT_COEFF_BUDGET: u64 = 50_000_000;

/// Exact distribution of `Z_n` truncated at `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistVector {
    pub horizon: usize,
    pub truncation: usize,
    /// `P[Z_n = k]` for `k = 0..=D`.
    pub probs: Vec<f64>,
    /// `P[Z_n = Δ]`
    pub delta_mass: f64,
    /// `P[D < Z_n < ∞]`
    pub tail_mass: f64,
}

impl DistVector {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.delta_mass + self.tail_mass
    }

    /// `Σ_k k^power P[Z_n = k]` over the retained coefficients.
    pub fn moment(&self, power: i32) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| (k as f64).powi(power) * p).sum()
    }

    /// `Σ_k probs[k] s^k`
    pub fn eval(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }
}

/// Power-series coefficients of `f_{0,n}` up to degree `d`, with the
/// graveyard mass `1 - f_{0,n}(1)` and the residual mass above `d`.
pub fn compose_coeffs(window: &Window, n: usize, d: usize, budget: u64) -> Result<DistVector> {
    if d < 1 {
        return Err(Error::arg("truncation D must be at least 1"));
    }
    if n > window.horizon() {
        return Err(Error::arg(format!("horizon {n} beyond the materialized window")));
    }
    let work = (d as u64 + 1).saturating_mul(n as u64);
    if work > budget {
        return Err(Error::Budget(format!("(D+1)·n = {work} exceeds the budget {budget}")));
    }
    let mut poly = vec![0.0, 1.0];
    let mut scratch = Vec::with_capacity(d + 1);
    for i in (1..=n).rev() {
        poly = substitute(window.law(i), &poly, d, &mut scratch);
    }
    poly.resize(d + 1, 0.0);

    let sweep = window.sweep(n)?;
    let survival = sweep.survival();
    let positive: f64 = poly[1..].iter().sum();
    Ok(DistVector {
        horizon: n,
        truncation: d,
        probs: poly,
        delta_mass: (1.0 - sweep.at_one(0)).max(0.0),
        tail_mass: (survival - positive).max(0.0),
    })
}

/// Coefficients of `f(P)` truncated at degree `d`.
fn substitute(law: &OffspringLaw, p: &[f64], d: usize, scratch: &mut Vec<f64>) -> Vec<f64> {
    if let Some((q, r, rate)) = law.lf_params() {
        // q + r / (1 - rate·P), the reciprocal expanded as a power series
        let len = if p.len() > 1 { d + 1 } else { 1 };
        let a0 = 1.0 - rate * p[0];
        let mut inv = vec![0.0; len];
        inv[0] = 1.0 / a0;
        for m in 1..len {
            let mut acc = 0.0;
            for j in 1..=m.min(p.len() - 1) {
                acc += p[j] * inv[m - j];
            }
            inv[m] = rate * acc / a0;
        }
        for c in inv.iter_mut() {
            *c *= r;
        }
        inv[0] += q;
        return inv;
    }
    let w = law.weights().expect("finite-support law");
    // Horner: (((w_K) P + w_{K-1}) P + ...) + w_0
    let mut acc = vec![w[w.len() - 1]];
    for &c in w.iter().rev().skip(1) {
        truncated_mul(&acc, p, d, scratch);
        std::mem::swap(&mut acc, scratch);
        acc[0] += c;
    }
    acc
}

fn truncated_mul(a: &[f64], b: &[f64], d: usize, out: &mut Vec<f64>) {
    let len = (a.len() + b.len() - 1).min(d + 1);
    out.clear();
    out.resize(len, 0.0);
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
}
