//! Possibly defective offspring laws `f_n`.
//!
//! A law puts mass `f[k]` on `k` children and the remaining `1 - f(1)` on the
//! graveyard `Δ`. Two representations are supported: finite support (which
//! covers the binary laws `f[0] + f[1] s + f[2] s²`) and linear fractional
//! laws `f(s) = q + r / (1 - p s)`, whose masses are `f[0] = q + r` and
//! `f[k] = r p^k` for `k ≥ 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, State};

/// Slack allowed on `f(1) ≤ 1` for rounding in user-supplied weights.
const MASS_SLACK: f64 = 1e-12;

/// Laws whose defect is below this are treated as proper.
const PROPER_EPS: f64 = 1e-12;

/// Relative tail mass at which linear fractional laws are cut off whenever an
/// explicit coefficient vector is needed.
pub const LF_TAIL_REL: f64 = 1e-14;

const BISECTION_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct OffspringLaw {
    kind: Kind,
    total: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Finite(Vec<f64>),
    LinearFractional { q: f64, r: f64, p: f64 },
}

/// The JSON literal of a law: `{"kind":"finite","weights":[...]}` or
/// `{"kind":"lf","q":..,"r":..,"p":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LawSpec {
    #[serde(rename = "finite")]
    Finite {
        #[serde(deserialize_with = "checked_weights")]
        weights: Vec<f64>,
    },
    #[serde(rename = "lf")]
    LinearFractional { q: f64, r: f64, p: f64 },
}

/// Weight vectors are checked as they are read so that errors point at
/// the `weights` field itself.
fn checked_weights<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    use serde::de::Error as _;
    let w = Vec::<f64>::deserialize(d)?;
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(D::Error::custom("weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total > 1.0 + MASS_SLACK {
        return Err(D::Error::custom(format!("weights sum to {total}, which exceeds 1")));
    }
    Ok(w)
}

impl TryFrom<LawSpec> for OffspringLaw {
    type Error = Error;

    fn try_from(spec: LawSpec) -> Result<Self> {
        match spec {
            LawSpec::Finite { weights } => OffspringLaw::finite(weights),
            LawSpec::LinearFractional { q, r, p } => OffspringLaw::linear_fractional(q, r, p),
        }
    }
}

impl From<OffspringLaw> for LawSpec {
    fn from(law: OffspringLaw) -> Self {
        match law.kind {
            Kind::Finite(weights) => LawSpec::Finite { weights },
            Kind::LinearFractional { q, r, p } => LawSpec::LinearFractional { q, r, p },
        }
    }
}

/// Truncated moments of one law and the smallest constants for the two
/// regularity conditions used by the absorption criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `E[X²; X ≥ 2]`
    pub m2_tail: f64,
    /// `E[X; X ≥ 2]`
    pub m1_tail: f64,
    /// `E[X | X ≥ 1]`, with `Δ` excluded from both numerator and denominator.
    pub cond_mean: f64,
    /// Smallest `c` with `E[X²; X≥2] ≤ c E[X; X≥2] E[X | X≥1]`.
    pub c8: f64,
    /// Smallest `c` with `E[X²; X≥2] ≤ c E[X; X≥2]`.
    pub c12: f64,
}

impl RegularityReport {
    fn from_sums(m2_tail: f64, m1_tail: f64, mass_pos: f64, mean: f64) -> Self {
        let cond_mean = if mass_pos > 0.0 { mean / mass_pos } else { 0.0 };
        let (c8, c12) = if m1_tail > 0.0 {
            (m2_tail / (m1_tail * cond_mean), m2_tail / m1_tail)
        } else {
            (0.0, 0.0)
        };
        RegularityReport { m2_tail, m1_tail, cond_mean, c8, c12 }
    }
}

impl OffspringLaw {
    /// A finite-support law with `weights[k] = f[k]`. Trailing zeros are dropped.
    pub fn finite(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::law("weights must be finite and nonnegative"));
        }
        while weights.len() > 1 && weights.last() == Some(&0.0) {
            weights.pop();
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + MASS_SLACK {
            return Err(Error::law(format!("weights sum to {total}, which exceeds 1")));
        }
        let law = OffspringLaw { kind: Kind::Finite(weights), total: total.min(1.0) };
        law.check_mean()?;
        Ok(law)
    }

    /// The binary law `f0 + f1 s + f2 s²`.
    pub fn binary(f0: f64, f1: f64, f2: f64) -> Result<Self> {
        OffspringLaw::finite(vec![f0, f1, f2])
    }

    /// `f(s) = q + r / (1 - p s)`.
    pub fn linear_fractional(q: f64, r: f64, p: f64) -> Result<Self> {
        if ![q, r, p].iter().all(|x| x.is_finite()) {
            return Err(Error::law("linear fractional parameters must be finite"));
        }
        if q < 0.0 {
            return Err(Error::law("q must be nonnegative"));
        }
        if r <= 0.0 {
            return Err(Error::law("r must be positive"));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::law("p must lie in [0, 1)"));
        }
        let total = q + r / (1.0 - p);
        if total > 1.0 + MASS_SLACK {
            return Err(Error::law(format!("q + r/(1-p) = {total} exceeds 1")));
        }
        let law = OffspringLaw { kind: Kind::LinearFractional { q, r, p }, total: total.min(1.0) };
        law.check_mean()?;
        Ok(law)
    }

    /// `f(s) = s`: one child, no defect.
    pub fn identity() -> Self {
        OffspringLaw { kind: Kind::Finite(vec![0.0, 1.0]), total: 1.0 }
    }

    fn check_mean(&self) -> Result<()> {
        let m = self.mean();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::law(format!("mean f'(1) = {m} must be positive and finite")));
        }
        Ok(())
    }

    pub fn is_linear_fractional(&self) -> bool {
        matches!(self.kind, Kind::LinearFractional { .. })
    }

    /// Finite support contained in `{0, 1, 2}`.
    pub fn is_binary(&self) -> bool {
        matches!(&self.kind, Kind::Finite(w) if w.len() <= 3)
    }

    /// Largest `k` with `f[k] > 0`, or `None` for infinite support.
    pub fn support_max(&self) -> Option<usize> {
        match &self.kind {
            Kind::Finite(w) => Some(w.len() - 1),
            Kind::LinearFractional { .. } => None,
        }
    }

    /// The weights of a finite-support law.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Finite(w) => Some(w),
            Kind::LinearFractional { .. } => None,
        }
    }

    /// `(q, r, p)` of a linear fractional law.
    pub fn lf_params(&self) -> Option<(f64, f64, f64)> {
        match self.kind {
            Kind::LinearFractional { q, r, p } => Some((q, r, p)),
            Kind::Finite(_) => None,
        }
    }

    /// `f[k]`.
    pub fn mass(&self, k: usize) -> f64 {
        match &self.kind {
            Kind::Finite(w) => w.get(k).copied().unwrap_or(0.0),
            Kind::LinearFractional { q, r, p } => {
                if k == 0 {
                    q + r
                } else {
                    r * p.powi(k as i32)
                }
            }
        }
    }

    /// `f(1)`.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// `δ = 1 - f(1)`.
    pub fn defect(&self) -> f64 {
        (1.0 - self.total).max(0.0)
    }

    pub fn is_proper(&self) -> bool {
        self.defect() <= PROPER_EPS
    }

    /// `f'(1)`.
    pub fn mean(&self) -> f64 {
        self.pgf_d1(1.0)
    }

    /// `f(s)`. Evaluates the analytic expression without range checks, so
    /// arguments slightly outside `[0, 1]` are fine (finite differences).
    pub fn pgf(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Finite(w) => w.iter().rev().fold(0.0, |acc, &c| acc * s + c),
            Kind::LinearFractional { q, r, p } => q + r / (1.0 - p * s),
        }
    }

    /// `f'(s)`.
    pub fn pgf_d1(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Finite(w) => w
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * s + k as f64 * c),
            Kind::LinearFractional { r, p, .. } => {
                let d = 1.0 - p * s;
                r * p / (d * d)
            }
        }
    }

    /// `f''(s)`.
    pub fn pgf_d2(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Finite(w) => w
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * s + (k * (k - 1)) as f64 * c),
            Kind::LinearFractional { r, p, .. } => {
                let d = 1.0 - p * s;
                2.0 * r * p * p / (d * d * d)
            }
        }
    }

    /// `f(s)`, `f'(s)` or `f''(s)` for `s ∈ [0, 1]`.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::arg(format!("s = {s} lies outside [0, 1]")));
        }
        match order {
            0 => Ok(self.pgf(s)),
            1 => Ok(self.pgf_d1(s)),
            2 => Ok(self.pgf_d2(s)),
            _ => Err(Error::arg(format!("derivative order {order} not in {{0, 1, 2}}"))),
        }
    }

    /// `(f(a) - f(b)) / (a - b)` for `0 ≤ b ≤ a ≤ 1`, computed without
    /// subtracting nearly equal values. Equals `f'(a)` when `a == b`.
    pub fn divided_difference(&self, a: f64, b: f64) -> f64 {
        match &self.kind {
            Kind::Finite(w) => {
                // h_k = Σ_{j<k} a^j b^{k-1-j}, with h_{k+1} = a^k + b h_k
                let mut h = 0.0;
                let mut a_pow = 1.0;
                let mut acc = 0.0;
                for &c in w.iter().skip(1) {
                    h = a_pow + b * h;
                    a_pow *= a;
                    acc += c * h;
                }
                acc
            }
            Kind::LinearFractional { r, p, .. } => r * p / ((1.0 - p * a) * (1.0 - p * b)),
        }
    }

    /// The proper law `g(s) = f(s) / f(1)`.
    pub fn normalize(&self) -> Result<Self> {
        if self.total <= 0.0 {
            return Err(Error::law("cannot normalize a law with f(1) = 0"));
        }
        let law = match &self.kind {
            Kind::Finite(w) => {
                let weights: Vec<f64> = w.iter().map(|x| x / self.total).collect();
                OffspringLaw { kind: Kind::Finite(weights), total: 1.0 }
            }
            &Kind::LinearFractional { q, r, p } => OffspringLaw {
                kind: Kind::LinearFractional { q: q / self.total, r: r / self.total, p },
                total: 1.0,
            },
        };
        Ok(law)
    }

    /// `c · f`, which adds `(1 - c) f(1)` to the defect.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::law(format!("scale factor {c} not in (0, 1]")));
        }
        match &self.kind {
            Kind::Finite(w) => OffspringLaw::finite(w.iter().map(|x| x * c).collect()),
            &Kind::LinearFractional { q, r, p } => OffspringLaw::linear_fractional(q * c, r * c, p),
        }
    }

    /// Masses `f[0..=K]`; for linear fractional laws `K` is the first index
    /// whose remaining tail is below `rel_tail` of the mass on `k ≥ 1`.
    pub fn coefficients(&self, rel_tail: f64) -> Vec<f64> {
        match &self.kind {
            Kind::Finite(w) => w.clone(),
            &Kind::LinearFractional { p, .. } => {
                // tail beyond K relative to the k ≥ 1 mass is p^K
                let k_max = if p == 0.0 {
                    0
                } else {
                    (rel_tail.ln() / p.ln()).ceil().max(1.0) as usize
                };
                (0..=k_max).map(|k| self.mass(k)).collect()
            }
        }
    }

    /// Smallest `θ ∈ (0, 1)` with `f(θ) = θ`, if any. Binary and linear
    /// fractional laws use the explicit root of the quadratic; other laws
    /// use bisection.
    pub fn fixed_point(&self) -> Option<f64> {
        if self.is_binary() || self.is_linear_fractional() {
            self.fixed_point_closed_form().ok().flatten()
        } else {
            self.fixed_point_bisection()
        }
    }

    fn has_no_interior_root_at_one(&self) -> bool {
        // Proper laws with f'(1) ≤ 1 only touch the diagonal at s = 1.
        self.is_proper() && self.mean() <= 1.0 + PROPER_EPS
    }

    /// Explicit smaller root of the quadratic `f(s) = s`, for binary and
    /// linear fractional laws.
    pub fn fixed_point_closed_form(&self) -> Result<Option<f64>> {
        if self.has_no_interior_root_at_one() {
            return Ok(None);
        }
        // Smaller root of a s² - b s + c = 0 written as 2c / (b + sqrt(b² - 4ac)),
        // the rationalized form of b/(2a) - sqrt(b²/(4a²) - c/a).
        let (b, disc, c) = match self.kind {
            Kind::LinearFractional { q, r, p } => {
                let b = 1.0 + p * q;
                (b, b * b - 4.0 * p * (q + r), q + r)
            }
            Kind::Finite(ref w) if w.len() <= 3 => {
                let (f0, f1, f2) = (self.mass(0), self.mass(1), self.mass(2));
                let b = 1.0 - f1;
                (b, b * b - 4.0 * f2 * f0, f0)
            }
            Kind::Finite(_) => {
                return Err(Error::arg("closed-form fixed point needs a binary or linear fractional law"))
            }
        };
        if disc < 0.0 || b <= 0.0 {
            return Ok(None);
        }
        let theta = 2.0 * c / (b + disc.sqrt());
        Ok(in_open_unit(theta))
    }

    /// Smallest root of `f(s) - s` in `(0, 1)` by bisection. Works for any law.
    pub fn fixed_point_bisection(&self) -> Option<f64> {
        if self.mass(0) <= 0.0 || self.has_no_interior_root_at_one() {
            return None;
        }
        let g = |s: f64| self.pgf(s) - s;
        // g is convex; its minimum on [0, 1] sits where f'(s) = 1, or at 1.
        let m = if self.pgf_d1(1.0) <= 1.0 {
            1.0
        } else {
            bisect(0.0, 1.0, |s| 1.0 - self.pgf_d1(s))
        };
        let gm = g(m);
        if gm > 0.0 {
            return None;
        }
        if gm == 0.0 {
            return in_open_unit(m);
        }
        in_open_unit(bisect(0.0, m, g))
    }

    /// Truncated moment sums and regularity constants. `trunc` bounds the
    /// summation index for linear fractional laws and is ignored otherwise.
    pub fn regularity(&self, trunc: usize) -> RegularityReport {
        let k_max = self.support_max().unwrap_or(trunc);
        let (mut m2, mut m1, mut pos, mut mean) = (0.0, 0.0, 0.0, 0.0);
        for k in 1..=k_max {
            let w = self.mass(k);
            let kf = k as f64;
            pos += w;
            mean += kf * w;
            if k >= 2 {
                m1 += kf * w;
                m2 += kf * kf * w;
            }
        }
        RegularityReport::from_sums(m2, m1, pos, mean)
    }

    /// Same quantities as [`regularity`](Self::regularity) from closed-form
    /// series for linear fractional laws (exact sums for finite support).
    pub fn regularity_exact(&self) -> RegularityReport {
        match self.kind {
            Kind::Finite(_) => self.regularity(0),
            Kind::LinearFractional { r, p, .. } => {
                // Σ_{k≥1} k p^k = p/(1-p)², Σ_{k≥1} k² p^k = p(1+p)/(1-p)³
                let om = 1.0 - p;
                let mean = r * p / (om * om);
                let second = r * p * (1.0 + p) / (om * om * om);
                let pos = r * p / om;
                RegularityReport::from_sums(second - r * p, mean - r * p, pos, mean)
            }
        }
    }

    /// One draw: `k` with probability `f[k]`, `Δ` with probability `1 - f(1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let u: f64 = rng.random();
        match &self.kind {
            Kind::Finite(w) => {
                let mut acc = 0.0;
                for (k, &c) in w.iter().enumerate() {
                    acc += c;
                    if u < acc {
                        return State::Count(k as u64);
                    }
                }
                if self.is_proper() {
                    // rounding left a sliver above the cumulative sum
                    State::Count((w.len() - 1) as u64)
                } else {
                    State::Delta
                }
            }
            &Kind::LinearFractional { q, r, p } => {
                if u < q + r {
                    return State::Count(0);
                }
                let v = u - (q + r);
                let positive_mass = r * p / (1.0 - p);
                if v >= positive_mass {
                    return if self.is_proper() { State::Count(1) } else { State::Delta };
                }
                // P[K ≤ k] = r p (1 - p^k) / (1 - p) among k ≥ 1
                let x = 1.0 - v * (1.0 - p) / (r * p);
                let k = (x.ln() / p.ln()).floor() + 1.0;
                State::Count(k.max(1.0) as u64)
            }
        }
    }
}

fn in_open_unit(theta: f64) -> Option<f64> {
    (theta > 0.0 && theta < 1.0 - PROPER_EPS).then_some(theta)
}

/// Root of a function that is positive at `lo` and nonpositive at `hi`.
fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
