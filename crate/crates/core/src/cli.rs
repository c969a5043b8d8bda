//! The `dgwve` experiment runner.
//!
//! Every subcommand reads an [`ExperimentConfig`] (from `--config`, with
//! flags overriding its fields), runs one module operation and writes one
//! artifact plus `<artifact>.manifest.json`. Exit codes: 0 success, 1 I/O
//! failure or a failed validation run, 2 configuration error, 3 failed
//! precondition, 4 exhausted budget.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::config::{self, BracketWindow, Command, Diagnostic, Diagnostics, ExperimentConfig, Format};
use crate::simulate::rng::{domain, stream};
use crate::simulate::{self, Mode, SimOptions};
use crate::trees::{self, ConditionedSampler};
use crate::{Environment, Error, Result};

/// Environment variable that relocates relative output paths.
pub const OUTPUT_DIR_VAR: &str = "DGWVE_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "dgwve", version, about = "Defective Galton-Watson processes in varying environments")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Run the command named in the configuration file.
    Run(Overrides),
    /// Check a configuration without running it.
    Validate(Overrides),
    /// f_{0,n}(s) or its derivatives for n = 0..horizon.
    Pgf(Overrides),
    /// Exact distribution of Z_horizon truncated at `truncation`.
    Dist(Overrides),
    /// E[Z_n] and E[Z_n²] for n = 1..horizon.
    Moments(Overrides),
    /// Extinction, Δ-absorption and survival probabilities for n = 1..horizon.
    Absorption(Overrides),
    /// Moment bounds on survival, and extinction-tail bounds when `sigma` is set.
    Bounds(Overrides),
    /// Series criteria for absorption and explosion.
    Check(Overrides),
    /// Growth rates of E[Z_n] and P[τ_a > n].
    Rates(Overrides),
    /// Monte Carlo summary of Z_horizon.
    Simulate(Overrides),
    /// Compare the direct and coupled simulations.
    Agree(Overrides),
    /// Trees conditioned on survival to `horizon`.
    TreeSample(Overrides),
    /// Spine construction against rejection and exact enumeration.
    TreeValidate(Overrides),
    /// E[Z_n | τ_a > n] against its upper bound for n = 1..horizon.
    CondMean(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment literal as JSON.
    #[arg(long = "env")]
    pub environment: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub extra_depth: Option<usize>,
    #[arg(long, requires = "n_max")]
    pub n0: Option<usize>,
    #[arg(long, requires = "n0")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "seed")]
    pub master_seed: Option<u64>,
    /// Output path, `-` for standard output.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Action {
    fn split(self) -> (Option<Command>, Overrides, bool) {
        use Action::*;
        match self {
            Run(o) => (None, o, false),
            Validate(o) => (None, o, true),
            Pgf(o) => (Some(Command::Pgf), o, false),
            Dist(o) => (Some(Command::Dist), o, false),
            Moments(o) => (Some(Command::Moments), o, false),
            Absorption(o) => (Some(Command::Absorption), o, false),
            Bounds(o) => (Some(Command::Bounds), o, false),
            Check(o) => (Some(Command::Check), o, false),
            Rates(o) => (Some(Command::Rates), o, false),
            Simulate(o) => (Some(Command::Simulate), o, false),
            Agree(o) => (Some(Command::Agree), o, false),
            TreeSample(o) => (Some(Command::TreeSample), o, false),
            TreeValidate(o) => (Some(Command::TreeValidate), o, false),
            CondMean(o) => (Some(Command::CondMean), o, false),
        }
    }
}

/// Load `--config` and apply the flags on top of it.
pub fn build_config(command: Option<Command>, o: Overrides) -> std::result::Result<ExperimentConfig, Diagnostic> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Diagnostic::new("", format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if command.is_some() {
        cfg.command = command;
    }
    if let Some(text) = &o.environment {
        cfg.environment = Some(config::parse_json::<Environment>(text, "/environment")?);
    }
    macro_rules! take {
        ($($field:ident),*) => {$(if o.$field.is_some() { cfg.$field = o.$field.clone(); })*};
    }
    take!(horizon, horizons, s, order, truncation, reps, mode, samples, extra_depth, eps, sigma, threads, master_seed, output, format);
    if let (Some(n0), Some(n_max)) = (o.n0, o.n_max) {
        cfg.bracket = Some(BracketWindow { n0, n_max });
    }
    Ok(cfg)
}

/// Output of one run before it is written.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// One row per sweep point.
    Rows(Vec<Value>),
    Doc(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub body: Body,
    /// Verdict of validation commands.
    pub pass: Option<bool>,
}

fn to_value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

/// `{module, operation, ...fields}`
fn row(module: &str, operation: &str, fields: impl Serialize) -> Value {
    let mut m = Map::new();
    m.insert("module".into(), module.into());
    m.insert("operation".into(), operation.into());
    match to_value(fields) {
        Value::Object(f) => m.extend(f),
        other => {
            m.insert("value".into(), other);
        }
    }
    Value::Object(m)
}

fn doc(module: &str, operation: &str, fields: impl Serialize, pass: Option<bool>) -> Artifact {
    Artifact { body: Body::Doc(row(module, operation, fields)), pass }
}

fn rows(v: Vec<Value>) -> Artifact {
    Artifact { body: Body::Rows(v), pass: None }
}

fn field<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::arg(format!("missing `{name}`")))
}

/// Run a validated configuration.
pub fn execute(cfg: &ExperimentConfig) -> Result<Artifact> {
    let command = field(cfg.command, "command")?;
    let env = cfg.environment.as_ref().ok_or_else(|| Error::arg("missing `environment`"))?;
    let job = || run_command(command, env, cfg);
    match cfg.threads {
        None => job(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::arg(format!("thread pool: {e}")))?
            .install(job),
    }
}

fn run_command(command: Command, env: &Environment, cfg: &ExperimentConfig) -> Result<Artifact> {
    let horizon = || field(cfg.horizon, "horizon");
    let seed = || field(cfg.master_seed, "master_seed");
    let opts = SimOptions::default();
    Ok(match command {
        Command::Pgf => {
            let (n, s, order) = (horizon()?, field(cfg.s, "s")?, cfg.order.unwrap_or(0));
            let window = env.window(n);
            let mut out = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let value = window.compose_eval(0, k, s, order)?;
                out.push(row("environment", "compose_eval", json!({ "n": k, "s": s, "order": order, "value": value })));
            }
            rows(out)
        }
        Command::Dist => {
            let (n, d) = (horizon()?, field(cfg.truncation, "truncation")?);
            let dist = env.compose_coeffs(n, d)?;
            let mut out: Vec<Value> = dist
                .probs
                .iter()
                .enumerate()
                .map(|(k, p)| row("environment", "compose_coeffs", json!({ "n": n, "k": k.to_string(), "prob": p })))
                .collect();
            out.push(row("environment", "compose_coeffs", json!({ "n": n, "k": "delta", "prob": dist.delta_mass })));
            out.push(row("environment", "compose_coeffs", json!({ "n": n, "k": "tail", "prob": dist.tail_mass })));
            rows(out)
        }
        Command::Moments => sweep(horizon()?, |n| Ok(row("analysis", "moments", analysis::moments(env, n)?)))?,
        Command::Absorption => {
            sweep(horizon()?, |n| Ok(row("analysis", "absorption_profile", analysis::absorption_profile(env, n)?)))?
        }
        Command::Bounds => sweep(horizon()?, |n| {
            let mut r = row("analysis", "prop2_bounds", analysis::prop2_bounds(env, n)?);
            if let Some(sigma) = cfg.sigma {
                let tail = analysis::extinction_tail(env, sigma, n)?;
                r["extinction_tail"] = json!({
                    "sigma": tail.sigma,
                    "upper": tail.upper,
                    "lower": tail.lower,
                    "exact_ext_tail": tail.exact_ext_tail,
                    "upper_holds": tail.upper_holds,
                    "lower_holds": tail.lower_holds,
                });
            }
            Ok(r)
        })?,
        Command::Check => {
            let horizons = cfg.horizons.clone().unwrap_or_else(|| analysis::SERIES_HORIZONS.to_vec());
            let verdicts = analysis::theorem_checks(env, &horizons)?;
            rows(verdicts.into_iter().map(|v| row("analysis", "theorem_checks", v)).collect())
        }
        Command::Rates => {
            let n = horizon()?;
            let win = cfg.bracket.unwrap_or(BracketWindow { n0: 1, n_max: n.max(1) });
            let eps = cfg.eps.unwrap_or(0.01);
            let bracket = analysis::rho_sigma(env, win.n0, win.n_max).ok();
            sweep(n, |k| {
                let g = analysis::growth_rate(env, k)?;
                let mut fields = json!({
                    "n": k,
                    "rate_mean": g.rate_mean,
                    "rate_survival": g.rate_survival,
                    "rho": bracket.as_ref().map(|b| b.rho),
                    "sigma": bracket.as_ref().and_then(|b| b.sigma),
                    "eps": eps,
                });
                let t3 = match &bracket {
                    Some(b) => match b.sigma {
                        Some(sigma) if sigma + eps < 1.0 => Some(analysis::theorem3_rates(env, b.rho, sigma, eps, k)?),
                        _ => None,
                    },
                    None => None,
                };
                for key in ["ratio_mean_rho", "tail_product_rho", "ratio_mean_sigma_eps", "tail_product_sigma_eps"] {
                    fields[key] = t3.map_or(Value::Null, |t| to_value(t)[key].clone());
                }
                Ok(row("analysis", "rates", fields))
            })?
        }
        Command::CondMean => sweep(horizon()?, |n| Ok(row("analysis", "conditional_mean", analysis::conditional_mean(env, n)?)))?,
        Command::Simulate => {
            let mode = cfg.mode.unwrap_or(Mode::Direct);
            let s = simulate::monte_carlo(env, horizon()?, field(cfg.reps, "reps")?, mode, seed()?, opts)?;
            doc("simulate", "monte_carlo", s, None)
        }
        Command::Agree => {
            let a = simulate::mode_agreement(env, horizon()?, field(cfg.reps, "reps")?, seed()?, opts)?;
            let pass = a.pass;
            doc("simulate", "mode_agreement", a, Some(pass))
        }
        Command::TreeSample => {
            let (n, seed) = (horizon()?, seed()?);
            let sampler = ConditionedSampler::new(env, n, cfg.extra_depth.unwrap_or(0))?;
            let mut trees_out = Vec::new();
            for i in 0..cfg.samples.unwrap_or(1) {
                let mut rng = stream(seed, domain::TREE_CONDITIONED, i);
                let (tree, spine) = sampler.sample(&mut rng)?;
                let labels: Vec<String> =
                    spine.spine.iter().map(|l| l.iter().map(u32::to_string).collect::<Vec<_>>().join(".")).collect();
                trees_out.push(json!({
                    "index": i,
                    "pairs": spine.pairs,
                    "spine": labels,
                    "height": tree.height(),
                    "gen_sizes": tree.gen_sizes(n),
                    "records": tree.to_records(),
                }));
            }
            doc("trees", "sample_conditioned", json!({ "n": n, "master_seed": seed, "trees": trees_out }), None)
        }
        Command::TreeValidate => {
            let r = trees::validate_prop4(env, horizon()?, field(cfg.samples, "samples")?, seed()?)?;
            let pass = r.pass;
            doc("trees", "validate_prop4", r, Some(pass))
        }
    })
}

fn sweep(n: usize, mut f: impl FnMut(usize) -> Result<Value>) -> Result<Artifact> {
    Ok(rows((1..=n).map(&mut f).collect::<Result<_>>()?))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Null => out.push((prefix.into(), String::new())),
        Value::String(s) => out.push((prefix.into(), s.clone())),
        other => out.push((prefix.into(), other.to_string())),
    }
}

/// Render the artifact in `format`.
pub fn render(artifact: &Artifact, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let value = match &artifact.body {
                Body::Rows(r) => Value::Array(r.clone()),
                Body::Doc(d) => d.clone(),
            };
            let mut bytes = serde_json::to_vec_pretty(&value)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let records: Vec<&Value> = match &artifact.body {
                Body::Rows(r) => r.iter().collect(),
                Body::Doc(d) => vec![d],
            };
            let mut header: Vec<String> = Vec::new();
            let flat: Vec<Vec<(String, String)>> = records
                .iter()
                .map(|r| {
                    let mut cells = Vec::new();
                    flatten("", r, &mut cells);
                    for (k, _) in &cells {
                        if !header.contains(k) {
                            header.push(k.clone());
                        }
                    }
                    cells
                })
                .collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            for cells in flat {
                let line: Vec<&str> = header
                    .iter()
                    .map(|h| cells.iter().find(|(k, _)| k == h).map_or("", |(_, v)| v.as_str()))
                    .collect();
                w.write_record(line)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub artifact: String,
    pub command: &'static str,
    pub format: Format,
    pub config_sha256: String,
    pub master_seed: Option<u64>,
    pub version: &'static str,
    pub pass: Option<bool>,
    pub timestamp_unix: u64,
}

pub fn manifest(cfg: &ExperimentConfig, artifact: &Path, format: Format, pass: Option<bool>) -> Manifest {
    let hash = Sha256::digest(cfg.canonical_json().as_bytes());
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Manifest {
        artifact: artifact.display().to_string(),
        command: cfg.command.map_or("", Command::name),
        format,
        config_sha256: hex::encode(hash),
        master_seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION"),
        pass,
        timestamp_unix,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Where the artifact goes: the configured path (relative paths under
/// `$DGWVE_OUTPUT_DIR` when set) or `dgwve-<command>.<ext>`.
pub fn output_path(cfg: &ExperimentConfig, command: Command, format: Format) -> PathBuf {
    let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("dgwve-{}.{}", command.name(), format.extension())));
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if path.is_relative() && path != Path::new("-") => PathBuf::from(dir).join(path),
        _ => path,
    }
}

/// Run and write the artifact and its manifest; returns the exit code.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<i32> {
    let command = field(cfg.command, "command")?;
    let format = cfg.format.unwrap_or_else(|| command.default_format());
    let artifact = execute(cfg)?;
    let bytes = render(&artifact, format)?;
    let path = output_path(cfg, command, format);
    let m = manifest(cfg, &path, format, artifact.pass);
    let mut m_bytes = serde_json::to_vec_pretty(&m)?;
    m_bytes.push(b'\n');
    if path == Path::new("-") {
        std::io::stdout().write_all(&bytes)?;
        std::io::stderr().write_all(&m_bytes)?;
    } else {
        write_atomic(&path, &bytes)?;
        let mut m_path = path.clone().into_os_string();
        m_path.push(".manifest.json");
        write_atomic(Path::new(&m_path), &m_bytes)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(if artifact.pass == Some(false) { EXIT_FAILED } else { EXIT_OK })
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidLaw(_) | Error::InvalidArgument(_) | Error::Json(_) => EXIT_SCHEMA,
        Error::Precondition(_) => EXIT_PRECONDITION,
        Error::Budget(_) => EXIT_BUDGET,
        Error::Io(_) | Error::Csv(_) => EXIT_FAILED,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidLaw(_) => "invalid_law",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::Precondition(_) => "precondition",
        Error::Budget(_) => "budget",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

fn report_diagnostics(d: &Diagnostics) {
    eprintln!("{}", serde_json::to_string_pretty(d).expect("diagnostics serialize"));
}

/// Entry point of the binary.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let (command, overrides, validate_only) = cli.action.split();
    let cfg = match build_config(command, overrides) {
        Ok(c) => c,
        Err(d) => {
            report_diagnostics(&Diagnostics { errors: vec![d], warnings: vec![] });
            return EXIT_SCHEMA;
        }
    };
    let diagnostics = config::validate(&cfg);
    if validate_only {
        println!("{}", serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize"));
        return if diagnostics.is_ok() { EXIT_OK } else { EXIT_SCHEMA };
    }
    if !diagnostics.is_ok() {
        report_diagnostics(&diagnostics);
        return EXIT_SCHEMA;
    }
    for w in &diagnostics.warnings {
        eprintln!("warning: {}: {}", w.pointer, w.message);
    }
    match run_and_write(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": error_kind(&e), "message": e.to_string() }));
            exit_code(&e)
        }
    }
}
