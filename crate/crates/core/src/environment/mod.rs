//! The varying environment `v = {f_n}` and everything computed by composing
//! its generating functions.
//!
//! An [`Environment`] is a total map `n ↦ f_n` for `n ≥ 1`. Numerical work
//! happens on a [`Window`], the materialized laws `f_1..f_N`.

mod coeffs;
pub(crate) mod compose;

pub use coeffs::{compose_coeffs, DistVector, DEFAULT_COEFF_BUDGET};
pub use compose::{MuProfile, Sweep, Window};

use serde::{Deserialize, Serialize};

use crate::{Error, OffspringLaw, Result};

/// Classification of a series or sequence appearing in the absorption
/// criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    /// `inf μ_n > 0`.
    Positive,
    /// `inf μ_n = 0`.
    Vanishes,
    Bounded,
    Unbounded,
    Inconclusive,
}

impl Verdict {
    /// Whether the verdict is the one a criterion's hypothesis asks for.
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Converges | Verdict::Positive | Verdict::Bounded)
    }
}

/// Analytic facts about the tail of an environment, known in closed form
/// for the named families. Each field overrides the numerical heuristic.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TailMeta {
    /// `Σ (1 - f_n[1])`
    pub one_minus_f1: Option<Verdict>,
    /// `inf_n μ_n`
    pub inf_mu: Option<Verdict>,
    /// `Σ δ_n μ_{n-1}`
    pub delta_mu: Option<Verdict>,
    /// `Σ f_n''(1) / (f_n'(1) μ_n)`
    pub curvature: Option<Verdict>,
    /// `sup_n c8(f_n)`
    pub c8_sup: Option<f64>,
    pub tags: Vec<String>,
}

/// Closed-form environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", deny_unknown_fields)]
pub enum Family {
    /// `f(s) = s` in every generation.
    #[serde(rename = "identity")]
    Identity,
    /// `f_1(s) = s/2`, `f_n(s) = (1 - 1/n) s` for `n ≥ 2`.
    #[serde(rename = "example-1a")]
    Example1a,
    /// `f_1(s) = s/2`, `f_n(s) = (1 - 1/n²) s` for `n ≥ 2`.
    #[serde(rename = "example-1b")]
    Example1b,
    /// `f_n(s) = (1 - 1/(n 2ⁿ)) s²`.
    #[serde(rename = "example-2a")]
    Example2a,
    /// `f_n(s) = (1 - 1/(n² 2ⁿ)) s²`.
    #[serde(rename = "example-2b")]
    Example2b,
    /// `f_n = (1 - δ_n) base` with `δ_n = scale · n^(-exponent) · geometric^(-n)`.
    #[serde(rename = "defect-decay")]
    DefectDecay { base: OffspringLaw, scale: f64, exponent: f64, geometric: f64 },
}

impl Family {
    fn validate(&self) -> Result<()> {
        if let Family::DefectDecay { scale, exponent, geometric, .. } = self {
            if !(scale.is_finite() && *scale >= 0.0) {
                return Err(Error::arg("defect-decay scale must be finite and nonnegative"));
            }
            if !(exponent.is_finite() && *exponent >= 0.0) {
                return Err(Error::arg("defect-decay exponent must be finite and nonnegative"));
            }
            if !(geometric.is_finite() && *geometric >= 1.0) {
                return Err(Error::arg("defect-decay geometric base must be at least 1"));
            }
            // δ_n is nonincreasing, so δ_1 < 1 suffices
            if scale / geometric >= 1.0 {
                return Err(Error::arg("defect-decay needs δ_1 = scale / geometric < 1"));
            }
        }
        Ok(())
    }

    fn defect(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Family::Identity => 0.0,
            Family::Example1a => {
                if n == 1 {
                    0.5
                } else {
                    1.0 / nf
                }
            }
            Family::Example1b => {
                if n == 1 {
                    0.5
                } else {
                    1.0 / (nf * nf)
                }
            }
            Family::Example2a => (-nf).exp2() / nf,
            Family::Example2b => (-nf).exp2() / (nf * nf),
            Family::DefectDecay { scale, exponent, geometric, .. } => {
                scale * nf.powf(-exponent) * geometric.powf(-nf)
            }
        }
    }

    fn law(&self, n: usize) -> OffspringLaw {
        let keep = 1.0 - self.defect(n);
        let built = match self {
            Family::Identity => return OffspringLaw::identity(),
            Family::Example1a | Family::Example1b => OffspringLaw::finite(vec![0.0, keep]),
            Family::Example2a | Family::Example2b => OffspringLaw::finite(vec![0.0, 0.0, keep]),
            Family::DefectDecay { base, .. } => base.scaled(keep),
        };
        built.expect("family parameters validated at construction")
    }

    fn tail_meta(&self) -> TailMeta {
        use Verdict::*;
        match self {
            Family::Identity => TailMeta {
                one_minus_f1: Some(Converges),
                inf_mu: Some(Positive),
                delta_mu: Some(Converges),
                curvature: Some(Converges),
                c8_sup: Some(0.0),
                tags: vec!["series_1_minus_f1: zero".into()],
            },
            Family::Example1a => TailMeta {
                one_minus_f1: Some(Diverges),
                // μ_n = 1/(2n)
                inf_mu: Some(Vanishes),
                // δ_n μ_{n-1} = 1/(2n(n-1))
                delta_mu: Some(Converges),
                curvature: Some(Converges),
                c8_sup: Some(0.0),
                tags: vec!["series_1_minus_f1: divergent_harmonic".into(), "mu_n: 1/(2n)".into()],
            },
            Family::Example1b => TailMeta {
                one_minus_f1: Some(Converges),
                // μ_n = (n+1)/(4n) ↓ 1/4
                inf_mu: Some(Positive),
                delta_mu: Some(Converges),
                curvature: Some(Converges),
                c8_sup: Some(0.0),
                tags: vec!["series_1_minus_f1: convergent_p2".into(), "mu_n: (n+1)/(4n)".into()],
            },
            Family::Example2a => TailMeta {
                one_minus_f1: Some(Diverges),
                inf_mu: Some(Positive),
                // δ_n μ_{n-1} ~ C/(2n)
                delta_mu: Some(Diverges),
                // 1/μ_n ~ 2^(-n)
                curvature: Some(Converges),
                c8_sup: Some(1.0),
                tags: vec![
                    "series_1_minus_f1: divergent_constant".into(),
                    "series_delta_mu: divergent_harmonic".into(),
                ],
            },
            Family::Example2b => TailMeta {
                one_minus_f1: Some(Diverges),
                inf_mu: Some(Positive),
                // δ_n μ_{n-1} ~ C/(2n²)
                delta_mu: Some(Converges),
                curvature: Some(Converges),
                c8_sup: Some(1.0),
                tags: vec![
                    "series_1_minus_f1: divergent_constant".into(),
                    "series_delta_mu: convergent_p2".into(),
                ],
            },
            Family::DefectDecay { base, exponent, geometric, scale } => {
                // 1 - f_n[1] = 1 - (1 - δ_n) base[1]
                let one_minus_f1 = if base.mass(1) < 1.0 {
                    Diverges
                } else if *scale == 0.0 || *geometric > 1.0 || *exponent > 1.0 {
                    Converges
                } else {
                    Diverges
                };
                TailMeta { one_minus_f1: Some(one_minus_f1), ..TailMeta::default() }
            }
        }
    }
}

/// JSON literal of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvSpec {
    Constant { law: OffspringLaw },
    /// `laws` for generations `1..=laws.len()`, then `tail` forever.
    Prefix { laws: Vec<OffspringLaw>, tail: OffspringLaw },
    /// `f_n = laws[(n - 1) mod len]`.
    Periodic { laws: Vec<OffspringLaw> },
    Named(Family),
    /// `v_by = {f_(by+1), f_(by+2), ...}`.
    Shifted { by: usize, env: Box<EnvSpec> },
}

impl EnvSpec {
    fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Periodic { laws } if laws.is_empty() => {
                Err(Error::arg("periodic environment needs at least one law"))
            }
            EnvSpec::Named(family) => family.validate(),
            EnvSpec::Shifted { env, .. } => env.validate(),
            _ => Ok(()),
        }
    }

    fn law(&self, n: usize) -> OffspringLaw {
        match self {
            EnvSpec::Constant { law } => law.clone(),
            EnvSpec::Prefix { laws, tail } => laws.get(n - 1).unwrap_or(tail).clone(),
            EnvSpec::Periodic { laws } => laws[(n - 1) % laws.len()].clone(),
            EnvSpec::Named(family) => family.law(n),
            EnvSpec::Shifted { by, env } => env.law(n + by),
        }
    }

    fn tail_meta(&self) -> Option<TailMeta> {
        match self {
            EnvSpec::Constant { law } => Some(constant_meta(law)),
            EnvSpec::Prefix { tail, .. } => {
                // a finite prefix changes neither convergence nor positivity
                // of inf μ, but it does change the supremum of c8
                let mut meta = constant_meta(tail);
                meta.c8_sup = None;
                Some(meta)
            }
            EnvSpec::Periodic { .. } => None,
            EnvSpec::Named(family) => Some(family.tail_meta()),
            EnvSpec::Shifted { env, .. } => env.tail_meta(),
        }
    }

    fn label(&self) -> String {
        match self {
            EnvSpec::Constant { .. } => "constant".into(),
            EnvSpec::Prefix { .. } => "prefix".into(),
            EnvSpec::Periodic { .. } => "periodic".into(),
            EnvSpec::Named(family) => match family {
                Family::Identity => "identity",
                Family::Example1a => "example-1a",
                Family::Example1b => "example-1b",
                Family::Example2a => "example-2a",
                Family::Example2b => "example-2b",
                Family::DefectDecay { .. } => "defect-decay",
            }
            .into(),
            EnvSpec::Shifted { by, env } => format!("{}+{by}", env.label()),
        }
    }
}

fn constant_meta(law: &OffspringLaw) -> TailMeta {
    use Verdict::*;
    let m = law.mean();
    let delta = law.defect();
    let curv = law.pgf_d2(1.0);
    TailMeta {
        one_minus_f1: Some(if law.mass(1) < 1.0 { Diverges } else { Converges }),
        // μ_n = mⁿ
        inf_mu: Some(if m >= 1.0 { Positive } else { Vanishes }),
        // δ m^(n-1)
        delta_mu: Some(if delta == 0.0 || m < 1.0 { Converges } else { Diverges }),
        // f''(1) / m^(n+1)
        curvature: Some(if curv == 0.0 || m > 1.0 { Converges } else { Diverges }),
        c8_sup: Some(law.regularity_exact().c8),
        tags: vec!["constant".into()],
    }
}

/// A varying environment `v = {f_n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvSpec", into = "EnvSpec")]
pub struct Environment {
    spec: EnvSpec,
}

impl TryFrom<EnvSpec> for Environment {
    type Error = Error;

    fn try_from(spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Environment { spec })
    }
}

impl From<Environment> for EnvSpec {
    fn from(env: Environment) -> Self {
        env.spec
    }
}

impl Environment {
    pub fn constant(law: OffspringLaw) -> Self {
        Environment { spec: EnvSpec::Constant { law } }
    }

    pub fn prefix(laws: Vec<OffspringLaw>, tail: OffspringLaw) -> Self {
        Environment { spec: EnvSpec::Prefix { laws, tail } }
    }

    pub fn periodic(laws: Vec<OffspringLaw>) -> Result<Self> {
        EnvSpec::Periodic { laws }.try_into()
    }

    pub fn named(family: Family) -> Result<Self> {
        EnvSpec::Named(family).try_into()
    }

    pub fn identity() -> Self {
        Environment { spec: EnvSpec::Named(Family::Identity) }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Short identifier used in output rows.
    pub fn label(&self) -> String {
        self.spec.label()
    }

    /// `f_n` for `n ≥ 1`.
    ///
    /// # Panics
    /// If `n == 0`; generations are numbered from one.
    pub fn law(&self, n: usize) -> OffspringLaw {
        assert!(n >= 1, "generations are numbered from 1");
        self.spec.law(n)
    }

    /// The shifted environment `v_l = {f_(l+1), f_(l+2), ...}`.
    pub fn shifted(&self, l: usize) -> Environment {
        if l == 0 {
            return self.clone();
        }
        let spec = match &self.spec {
            EnvSpec::Shifted { by, env } => EnvSpec::Shifted { by: by + l, env: env.clone() },
            other => EnvSpec::Shifted { by: l, env: Box::new(other.clone()) },
        };
        Environment { spec }
    }

    pub fn tail_meta(&self) -> Option<TailMeta> {
        self.spec.tail_meta()
    }

    /// Materialize `f_1..f_n`.
    pub fn window(&self, n: usize) -> Window {
        Window::new((1..=n).map(|i| self.law(i)).collect())
    }

    /// `f_{k,n}(s)` or one of its first two derivatives.
    pub fn compose_eval(&self, k: usize, n: usize, s: f64, order: u8) -> Result<f64> {
        self.window(n).compose_eval(k, n, s, order)
    }

    pub fn mu_profile(&self, n: usize, s: f64) -> Result<MuProfile> {
        self.window(n).mu_profile(n, s)
    }

    pub fn compose_coeffs(&self, n: usize, d: usize) -> Result<DistVector> {
        compose_coeffs(&self.window(n), n, d, DEFAULT_COEFF_BUDGET)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law_a() -> OffspringLaw {
        OffspringLaw::binary(0.45, 0.0, 0.45).unwrap()
    }

    #[test]
    fn named_family_formulas() {
        let e1a = Environment::named(Family::Example1a).unwrap();
        assert_eq!(e1a.law(1).mass(1), 0.5);
        assert_eq!(e1a.law(4).mass(1), 0.75);
        let e1b = Environment::named(Family::Example1b).unwrap();
        assert_eq!(e1b.law(1).mass(1), 0.5);
        assert_eq!(e1b.law(3).mass(1), 1.0 - 1.0 / 9.0);
        let e2a = Environment::named(Family::Example2a).unwrap();
        assert_eq!(e2a.law(3).mass(2), 1.0 - 1.0 / 24.0);
        let e2b = Environment::named(Family::Example2b).unwrap();
        assert_eq!(e2b.law(3).mass(2), 1.0 - 1.0 / 72.0);
        assert_eq!(e2b.law(2000).mass(2), 1.0);
    }

    #[test]
    fn prefix_periodic_shifted() {
        let b = OffspringLaw::linear_fractional(0.1, 0.4, 0.5).unwrap();
        let p = Environment::prefix(vec![b.clone()], law_a());
        assert_eq!(p.law(1), b);
        assert_eq!(p.law(5), law_a());
        let alt = Environment::periodic(vec![law_a(), b.clone()]).unwrap();
        assert_eq!(alt.law(3), law_a());
        assert_eq!(alt.law(4), b);
        let sh = alt.shifted(1);
        assert_eq!(sh.law(1), b);
        assert_eq!(sh.shifted(1).law(1), law_a());
        assert!(Environment::periodic(vec![]).is_err());
    }

    #[test]
    fn json_literals() {
        let c: Environment =
            serde_json::from_str(r#"{"kind":"constant","law":{"kind":"finite","weights":[0.45,0,0.45]}}"#).unwrap();
        assert_eq!(c, Environment::constant(law_a()));
        let n: Environment = serde_json::from_str(r#"{"kind":"named","id":"example-1b"}"#).unwrap();
        assert_eq!(n.label(), "example-1b");
        let d: Environment = serde_json::from_str(
            r#"{"kind":"named","id":"defect-decay","base":{"kind":"finite","weights":[0.25,0.5,0.25]},
                "scale":1.0,"exponent":2.0,"geometric":2.0}"#,
        )
        .unwrap();
        assert!((d.law(1).defect() - 0.5).abs() < 1e-15);
        let round: Environment = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(round, d);
        let p: Environment = serde_json::from_str(
            r#"{"kind":"prefix","laws":[{"kind":"lf","q":0.1,"r":0.4,"p":0.5}],"tail":{"kind":"finite","weights":[0,1]}}"#,
        )
        .unwrap();
        assert_eq!(p.law(2), OffspringLaw::identity());
        assert!(serde_json::from_str::<Environment>(r#"{"kind":"named","id":"example-9"}"#).is_err());
        assert!(serde_json::from_str::<Environment>(
            r#"{"kind":"named","id":"defect-decay","base":{"kind":"finite","weights":[0,1]},"scale":3,"exponent":0,"geometric":2}"#
        )
        .is_err());
    }

    #[test]
    fn verdict_holds() {
        assert!(Verdict::Converges.holds());
        assert!(Verdict::Positive.holds());
        assert!(Verdict::Bounded.holds());
        assert!(!Verdict::Unbounded.holds());
        assert!(!Verdict::Diverges.holds());
        assert!(!Verdict::Vanishes.holds());
        assert!(!Verdict::Inconclusive.holds());
    }
}
