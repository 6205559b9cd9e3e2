//! Problem specs, result files and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evolve::{auto_dt, dt_budget, FrontTrace, GridSpec, Stencil, TraceSample};
use crate::kernel::{KernelMeasure, KernelSpec};
use crate::problem::Problem;
use crate::reaction::Reaction;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "FRONTLAB_THREADS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: JSON parse error: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid spec:\n{}", format_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("thread pool: {0}")]
    Threads(String),
}

fn format_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {}: {}", i.pointer, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A validation failure located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub pointer: String,
    pub message: String,
}

impl Issue {
    fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

/// Time step: a number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSetting {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSpec {
    pub dx: f64,
    #[serde(default = "default_dt")]
    pub dt: DtSetting,
    pub horizon: f64,
    pub window_width: f64,
    /// Fraction of the window left of the initial step.
    #[serde(default = "default_anchor")]
    pub anchor: f64,
    #[serde(default = "default_true")]
    pub recenter: bool,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
}

fn default_dt() -> DtSetting {
    DtSetting::Auto(AutoTag::Auto)
}

fn default_anchor() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_thetas() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}

/// Numerics after `"auto"` is resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics {
    pub dt: f64,
    pub grid: GridSpec,
    pub horizon: f64,
    pub thetas: Vec<f64>,
}

/// A fully validated problem spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub numerics: Option<Numerics>,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of the spec file bytes.
    pub sha256: String,
}

impl ProblemSpec {
    pub fn seed(&self, task: &str) -> Option<u64> {
        self.seeds.get(task).copied()
    }
}

/// Kernel or reaction given inline or as a path relative to the spec.
fn resolve_source(value: &Value, base: &Path) -> Result<Value, String> {
    match value {
        Value::String(rel) => {
            let path = base.join(rel);
            let text = fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
        other => Ok(other.clone()),
    }
}

pub fn read_json_file(path: &Path) -> Result<(Value, Vec<u8>), ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value = serde_json::from_slice(&bytes).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((value, bytes))
}

pub fn load_kernel(path: &Path) -> Result<KernelMeasure, ConfigError> {
    let (value, _) = read_json_file(path)?;
    parse_kernel(&value).map_err(|i| ConfigError::Invalid(vec![i]))
}

pub fn load_reaction(path: &Path) -> Result<Reaction, ConfigError> {
    let (value, _) = read_json_file(path)?;
    parse_reaction(&value).map_err(|i| ConfigError::Invalid(vec![i]))
}

fn parse_kernel(value: &Value) -> Result<KernelMeasure, Issue> {
    let spec: KernelSpec = serde_json::from_value(value.clone()).map_err(|e| Issue::new("/kernel", e.to_string()))?;
    let atoms = spec.atoms.clone();
    KernelMeasure::try_from(spec).map_err(|e| {
        use crate::kernel::KernelError as K;
        let pointer = match &e {
            K::BadAtomMass { pos, .. } => atoms
                .iter()
                .position(|a| a.pos == *pos)
                .map_or("/kernel/atoms".to_string(), |i| format!("/kernel/atoms/{i}/mass")),
            K::Mass(_) => "/kernel/mass".to_string(),
            K::BadBin { .. } | K::Overlap(..) => "/kernel/bins".to_string(),
            _ => "/kernel".to_string(),
        };
        Issue::new(pointer, e.to_string())
    })
}

fn parse_reaction(value: &Value) -> Result<Reaction, Issue> {
    serde_json::from_value(value.clone()).map_err(|e| Issue::new("/reaction", e.to_string()))
}

/// Reads and validates a problem spec; every problem found is reported.
pub fn load(path: &Path) -> Result<ProblemSpec, ConfigError> {
    let (value, bytes) = read_json_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_spec(&value, base, sha256_hex(&bytes))
}

pub fn parse_spec(value: &Value, base: &Path, sha256: String) -> Result<ProblemSpec, ConfigError> {
    let mut issues = Vec::new();
    let Some(obj) = value.as_object() else {
        return Err(ConfigError::Invalid(vec![Issue::new("", "spec must be a JSON object")]));
    };
    for key in obj.keys() {
        if !["kernel", "reaction", "mu", "numerics", "seeds"].contains(&key.as_str()) {
            issues.push(Issue::new(format!("/{key}"), "unknown field"));
        }
    }

    let kernel = match obj.get("kernel") {
        None => {
            issues.push(Issue::new("/kernel", "missing"));
            None
        }
        Some(v) => match resolve_source(v, base) {
            Err(e) => {
                issues.push(Issue::new("/kernel", e));
                None
            }
            Ok(v) => parse_kernel(&v).map_err(|i| issues.push(i)).ok(),
        },
    };
    let reaction = match obj.get("reaction") {
        None => {
            issues.push(Issue::new("/reaction", "missing"));
            None
        }
        Some(v) => match resolve_source(v, base) {
            Err(e) => {
                issues.push(Issue::new("/reaction", e));
                None
            }
            Ok(v) => parse_reaction(&v).map_err(|i| issues.push(i)).ok(),
        },
    };
    if let Some(f) = &reaction {
        let report = f.validate();
        for c in report.checks.iter().filter(|c| !c.passed) {
            let at = c
                .worst
                .map_or(String::new(), |(u, v)| format!(" (worst sample u = {u}, value {v:e})"));
            issues.push(Issue::new("/reaction", format!("hypothesis {} fails{at}", c.name)));
        }
    }
    let mu = match obj.get("mu").map(Value::as_f64) {
        None => {
            issues.push(Issue::new("/mu", "missing"));
            None
        }
        Some(Some(m)) if m > 0.0 && m.is_finite() => Some(m),
        Some(_) => {
            issues.push(Issue::new("/mu", "must be a positive number"));
            None
        }
    };

    let numerics_spec = match obj.get("numerics") {
        None => None,
        Some(v) => match serde_json::from_value::<NumericsSpec>(v.clone()) {
            Ok(n) => Some(n),
            Err(e) => {
                issues.push(Issue::new("/numerics", e.to_string()));
                None
            }
        },
    };
    let seeds = match obj.get("seeds") {
        None => BTreeMap::new(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            issues.push(Issue::new("/seeds", e.to_string()));
            BTreeMap::new()
        }),
    };

    let mut numerics = None;
    if let (Some(n), Some(mu), Some(f), Some(j)) = (&numerics_spec, mu, &reaction, &kernel) {
        numerics = check_numerics(n, mu, f.fprime0(), j, &mut issues);
    }
    if !issues.is_empty() {
        return Err(ConfigError::Invalid(issues));
    }
    let problem = Problem::new(kernel.unwrap(), mu.unwrap(), reaction.unwrap())
        .map_err(|e| ConfigError::Invalid(vec![Issue::new("/reaction", e.to_string())]))?;
    Ok(ProblemSpec {
        problem,
        numerics,
        seeds,
        sha256,
    })
}

fn check_numerics(n: &NumericsSpec, mu: f64, fprime0: f64, j: &KernelMeasure, issues: &mut Vec<Issue>) -> Option<Numerics> {
    let before = issues.len();
    if !(n.dx > 0.0 && n.dx.is_finite()) {
        issues.push(Issue::new("/numerics/dx", "must be positive"));
    } else if let Err(e) = Stencil::from_kernel(j, n.dx) {
        issues.push(Issue::new("/numerics/dx", e.to_string()));
    }
    let budget = dt_budget(mu, fprime0);
    let dt = match n.dt {
        DtSetting::Auto(_) => auto_dt(mu, fprime0),
        DtSetting::Fixed(dt) => {
            if !(dt > 0.0 && dt <= budget) {
                issues.push(Issue::new(
                    "/numerics/dt",
                    format!("dt = {dt} must lie in (0, {budget}] (0.5/(mu + f'(0)))"),
                ));
            }
            dt
        }
    };
    if !(n.horizon >= 0.0 && n.horizon.is_finite()) {
        issues.push(Issue::new("/numerics/horizon", "must be non-negative"));
    }
    if !(n.window_width > 0.0 && n.window_width.is_finite()) {
        issues.push(Issue::new("/numerics/window_width", "must be positive"));
    }
    if !(0.25..=0.75).contains(&n.anchor) {
        issues.push(Issue::new("/numerics/anchor", "must lie in [0.25, 0.75]"));
    }
    for (i, &th) in n.thetas.iter().enumerate() {
        if !(th > 0.0 && th < 1.0) {
            issues.push(Issue::new(format!("/numerics/thetas/{i}"), "must lie in (0, 1)"));
        }
    }
    if issues.len() > before {
        return None;
    }
    Some(Numerics {
        dt,
        grid: GridSpec {
            dx: n.dx,
            x_min: -n.anchor * n.window_width,
            x_max: (1.0 - n.anchor) * n.window_width,
            recenter: n.recenter,
        },
        horizon: n.horizon,
        thetas: n.thetas.clone(),
    })
}

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn create_parent(path: &Path) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ConfigError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV with `# key=value` metadata lines, a header and float rows.
pub fn write_csv(path: &Path, meta: &[(String, String)], header: &[&str], rows: &[Vec<f64>]) -> Result<(), ConfigError> {
    write_bytes(path, render_csv(meta, header, rows).as_bytes())
}

pub fn render_csv(meta: &[(String, String)], header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Metadata, header and rows of a CSV file.
pub type ParsedCsv = (Vec<(String, String)>, Vec<String>, Vec<Vec<f64>>);

/// Parses [`render_csv`] output back into metadata, header and rows.
pub fn parse_csv(text: &str) -> Result<ParsedCsv, ConfigError> {
    let mut meta = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(m) = line.strip_prefix('#') {
            let (k, v) = m.trim().split_once('=').ok_or(ConfigError::Csv {
                line: n + 1,
                message: "metadata must be key=value".into(),
            })?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
        } else if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>());
        } else {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::Csv {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
    }
    let header = header.ok_or(ConfigError::Csv {
        line: 0,
        message: "missing header".into(),
    })?;
    Ok((meta, header, rows))
}

/// Trace as rows `t, theta, sigma, flagged`; `flagged` is 0 or 1.
pub fn render_trace_csv(trace: &FrontTrace, meta: &[(String, String)]) -> String {
    let mut out = render_csv(meta, &["t", "theta", "sigma", "flagged"], &[]);
    for s in &trace.samples {
        for (&th, &sg) in trace.thetas.iter().zip(&s.sigma) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_float(s.t),
                fmt_float(th),
                fmt_float(sg),
                s.flagged as u8
            );
        }
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &FrontTrace, meta: &[(String, String)]) -> Result<(), ConfigError> {
    write_bytes(path, render_trace_csv(trace, meta).as_bytes())
}

pub fn read_trace_csv(path: &Path) -> Result<(FrontTrace, Vec<(String, String)>), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (meta, header, rows) = parse_csv(&text)?;
    if header.len() < 3 || header[..3] != ["t", "theta", "sigma"] {
        return Err(ConfigError::Csv {
            line: 0,
            message: format!("expected columns t,theta,sigma, got {}", header.join(",")),
        });
    }
    let mut trace = FrontTrace::default();
    for row in rows {
        let (t, th, sg) = (row[0], row[1], row[2]);
        let flagged = row.get(3).is_some_and(|&f| f != 0.0);
        if !trace.thetas.contains(&th) {
            trace.thetas.push(th);
        }
        let k = trace.thetas.iter().position(|&x| x == th).unwrap();
        match trace.samples.last_mut() {
            Some(s) if s.t == t => {
                if s.sigma.len() <= k {
                    s.sigma.resize(k + 1, f64::NAN);
                }
                s.sigma[k] = sg;
                s.flagged |= flagged;
            }
            _ => {
                let mut sigma = vec![f64::NAN; k + 1];
                sigma[k] = sg;
                trace.samples.push(TraceSample { t, sigma, flagged });
            }
        }
    }
    Ok((trace, meta))
}

/// Pretty JSON with a trailing newline; struct fields keep declaration order.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), ConfigError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn sha256_file(path: &Path) -> Result<String, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub spec_sha256: Option<String>,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
    /// Output path → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, spec_sha256: Option<String>, seed: Option<u64>) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            spec_sha256,
            seed,
            wall_time_seconds: 0.0,
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) -> Result<(), ConfigError> {
        let digest = sha256_file(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }
}

/// Sizes the global worker pool from `requested`, else `FRONTLAB_THREADS`,
/// else the hardware count. Only the first call has an effect.
pub fn configure_threads(requested: Option<usize>) -> Result<usize, ConfigError> {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| ConfigError::Threads(format!("{THREADS_ENV}={v}: {e}")))
        })
        .transpose()?;
    let n = requested.or(from_env).unwrap_or(0);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(rayon::current_num_threads())
}
