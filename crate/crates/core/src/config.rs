//! Experiment configuration files for the `dgwve` runner.
//!
//! A configuration is a JSON object; the schema is published in
//! `schema/experiment.schema.json`. Reading reports the first structural
//! error with a JSON pointer to the offending value, [`validate`] then adds
//! semantic checks and pre-flight warnings without running anything.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::simulate::Mode;
use crate::Environment;

/// Survival probabilities below this trigger a pre-flight warning for
/// commands that condition on `{τ_a > n}`.
pub const SURVIVAL_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pgf,
    Dist,
    Moments,
    Absorption,
    Bounds,
    Check,
    Rates,
    Simulate,
    Agree,
    TreeSample,
    TreeValidate,
    CondMean,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Pgf,
        Command::Dist,
        Command::Moments,
        Command::Absorption,
        Command::Bounds,
        Command::Check,
        Command::Rates,
        Command::Simulate,
        Command::Agree,
        Command::TreeSample,
        Command::TreeValidate,
        Command::CondMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Pgf => "pgf",
            Command::Dist => "dist",
            Command::Moments => "moments",
            Command::Absorption => "absorption",
            Command::Bounds => "bounds",
            Command::Check => "check",
            Command::Rates => "rates",
            Command::Simulate => "simulate",
            Command::Agree => "agree",
            Command::TreeSample => "tree-sample",
            Command::TreeValidate => "tree-validate",
            Command::CondMean => "cond-mean",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, Command::Simulate | Command::Agree | Command::TreeSample | Command::TreeValidate)
    }

    fn conditions_on_survival(self) -> bool {
        matches!(self, Command::TreeSample | Command::TreeValidate | Command::CondMean)
    }

    /// Sweeps over `n` are written as CSV, single results as JSON.
    pub fn default_format(self) -> Format {
        match self {
            Command::Simulate | Command::Agree | Command::TreeSample | Command::TreeValidate => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `[n0, n_max]` for fixed-point brackets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketWindow {
    pub n0: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    /// `n`, the last generation of sweeps and the conditioning horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Partial-sum horizons for `check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    /// Evaluation point for `pgf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Derivative order for `pgf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    /// Largest population tracked by `dist`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Generations grown above the spine tip by `tree-sample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<BracketWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Upper end of the extinction-tail bracket for `bounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// A finding with a JSON pointer into the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub pointer: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { pointer: pointer.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

/// The first offspring-law literal under `node` that fails to build, with
/// the field its error names.
fn failing_law(node: &serde_json::Value, pointer: &str) -> Option<String> {
    use serde_json::Value;
    match node {
        Value::Object(m) => {
            if matches!(m.get("kind").and_then(Value::as_str), Some("finite" | "lf")) {
                if let Err(e) = serde_json::from_value::<crate::OffspringLaw>(node.clone()) {
                    let msg = e.to_string();
                    let field = ["weights", "q", "r", "p"]
                        .into_iter()
                        .find(|f| msg.starts_with(&format!("{f} ")) || msg.contains(&format!("`{f}`")));
                    let field = field.or(msg.contains("weights").then_some("weights"));
                    return Some(match field {
                        Some(f) => format!("{pointer}/{f}"),
                        None => pointer.to_string(),
                    });
                }
                return None;
            }
            m.iter().find_map(|(k, v)| failing_law(v, &format!("{pointer}/{k}")))
        }
        Value::Array(a) => a.iter().enumerate().find_map(|(i, v)| failing_law(v, &format!("{pointer}/{i}"))),
        _ => None,
    }
}

/// Deserialize `T` from JSON text, mapping the first error to a pointer
/// below `prefix`.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, prefix: &str) -> Result<T, Diagnostic> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let at = pointer_of(e.path());
        // tagged literals are buffered before they are decoded, which hides
        // the path below them; look for the offending law directly
        let refined = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.pointer(&at).and_then(|node| failing_law(node, &at)));
        Diagnostic::new(format!("{prefix}{}", refined.unwrap_or(at)), e.inner().to_string())
    })?;
    de.end().map_err(|e| Diagnostic::new(prefix, e.to_string()))?;
    Ok(value)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Diagnostic> {
        parse_json(text, "")
    }

    /// Canonical JSON, hashed into manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configurations serialize")
    }
}

fn need<T>(d: &mut Diagnostics, value: &Option<T>, field: &str, command: Command) {
    if value.is_none() {
        d.errors.push(Diagnostic::new(format!("/{field}"), format!("`{}` requires `{field}`", command.name())));
    }
}

/// Semantic checks and pre-flight warnings for a parsed configuration.
pub fn validate(cfg: &ExperimentConfig) -> Diagnostics {
    let mut d = Diagnostics::default();
    let Some(command) = cfg.command else {
        d.errors.push(Diagnostic::new("/command", "no command given"));
        return d;
    };
    if cfg.environment.is_none() {
        d.errors.push(Diagnostic::new("/environment", "no environment given"));
    }
    if command != Command::Check {
        need(&mut d, &cfg.horizon, "horizon", command);
    }
    if command.is_random() {
        need(&mut d, &cfg.master_seed, "master_seed", command);
    }
    match command {
        Command::Pgf => {
            need(&mut d, &cfg.s, "s", command);
            if let Some(s) = cfg.s {
                if !(0.0..=1.0).contains(&s) {
                    d.errors.push(Diagnostic::new("/s", format!("s = {s} lies outside [0, 1]")));
                }
            }
            if cfg.order.is_some_and(|o| o > 2) {
                d.errors.push(Diagnostic::new("/order", "derivative order must be 0, 1 or 2"));
            }
        }
        Command::Dist => need(&mut d, &cfg.truncation, "truncation", command),
        Command::Check => {
            if let Some(h) = &cfg.horizons {
                if h.is_empty() || h[0] == 0 || h.windows(2).any(|w| w[0] >= w[1]) {
                    d.errors.push(Diagnostic::new("/horizons", "horizons must be nonempty, positive and increasing"));
                }
            }
        }
        Command::Rates => {
            if cfg.bracket.is_some_and(|b| b.n0 == 0 || b.n0 > b.n_max) {
                d.errors.push(Diagnostic::new("/bracket", "need 1 ≤ n0 ≤ n_max"));
            }
            if cfg.eps.is_some_and(|e| !(e > 0.0 && e < 1.0)) {
                d.errors.push(Diagnostic::new("/eps", "eps must lie in (0, 1)"));
            }
        }
        Command::Bounds => {
            if cfg.sigma.is_some_and(|s| !(s > 0.0 && s < 1.0)) {
                d.errors.push(Diagnostic::new("/sigma", "sigma must lie in (0, 1)"));
            }
        }
        Command::Simulate | Command::Agree => {
            need(&mut d, &cfg.reps, "reps", command);
            if cfg.reps == Some(0) {
                d.errors.push(Diagnostic::new("/reps", "reps must be positive"));
            }
        }
        Command::TreeValidate => {
            need(&mut d, &cfg.samples, "samples", command);
            if cfg.samples == Some(0) {
                d.errors.push(Diagnostic::new("/samples", "samples must be positive"));
            }
        }
        _ => {}
    }
    if cfg.threads == Some(0) {
        d.errors.push(Diagnostic::new("/threads", "threads must be positive"));
    }
    if command.conditions_on_survival() {
        if let (Some(env), Some(n)) = (&cfg.environment, cfg.horizon) {
            match env.window(n).sweep(n) {
                Ok(sweep) => {
                    let p = sweep.survival();
                    if p == 0.0 {
                        d.errors.push(Diagnostic::new(
                            "/horizon",
                            format!("P[τ_a > {n}] = 0 (log = {:.6e})", sweep.log_survival()),
                        ));
                    } else if p < SURVIVAL_WARNING {
                        d.warnings.push(Diagnostic::new(
                            "/horizon",
                            format!("P[τ_a > {n}] = {p:.6e} is below {SURVIVAL_WARNING:e}"),
                        ));
                    }
                }
                Err(e) => d.errors.push(Diagnostic::new("/horizon", e.to_string())),
            }
        }
    }
    d
}
