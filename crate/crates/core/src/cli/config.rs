//! Experiment files: a model, one command with its parameters, output
//! settings and a seed.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! premium_rate = 2.0
//! claim_intensity = 1.0
//! [model.claims]
//! kind = "exponential"
//! [model.claims.params]
//! rate = 1.0
//!
//! [command]
//! name = "ruin"
//! u = [0, 5, 10]
//!
//! [output]
//! format = "csv"
//! path = "out"
//! ```

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::estimator::Method;
use crate::risk_model::config::{get_f64, get_f64_list, get_table, join, model_from_table, reject_unknown, Document};
use crate::risk_model::RiskModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuinSpec {
    pub u: Vec<f64>,
    /// Total paths per reserve, split over `batches`.
    pub paths: u64,
    pub batches: u64,
    pub method: Method,
    pub n_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsSpec {
    /// Descending-ladder samples for the passage-delay law.
    pub ladder_samples: u64,
    pub time_edges: Vec<f64>,
    /// Points per axis of the quintuple density grid.
    pub quintuple_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSpec {
    /// Paths per Monte Carlo check.
    pub paths: u64,
    pub excursions: u64,
    pub n_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdpfSpec {
    pub lambda_p: Vec<f64>,
    /// `η` under the Cramér condition, `β` under convolution equivalence.
    pub eta: Vec<f64>,
    pub delta: Vec<f64>,
    /// Reserve of the Monte Carlo cross-check.
    pub mc_u: Option<f64>,
    /// Zero disables the cross-check.
    pub mc_paths: u64,
    pub batches: u64,
    pub n_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Ruin(RuinSpec),
    Limits(LimitsSpec),
    Validate(ValidateSpec),
    Edpf(EdpfSpec),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ruin(_) => "ruin",
            Command::Limits(_) => "limits",
            Command::Validate(_) => "validate",
            Command::Edpf(_) => "edpf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub format: Format,
    pub path: PathBuf,
    /// Right end of the density grids; `None` means `10/α`.
    pub grid_max: Option<f64>,
    /// Grid spacing; `None` means `grid_max/400`.
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: RiskModel,
    pub command: Command,
    pub output: OutputSpec,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "ruinlab-out";

impl ExperimentConfig {
    pub fn parse(source: &str) -> Result<Self> {
        let doc = Document::parse(source)?;
        let root = doc.table.clone();
        reject_unknown(&doc, &root, "", &["seed", "model", "command", "output"])?;
        let seed = match root.get("seed") {
            None => DEFAULT_SEED,
            Some(_) => get_count(&doc, &root, "", "seed", 0)?,
        };
        let model = model_from_table(&doc, get_table(&doc, &root, "", "model")?, "model")?;
        let command = parse_command(&doc, get_table(&doc, &root, "", "command")?)?;
        let output = match root.get("output") {
            None => OutputSpec { format: Format::Csv, path: DEFAULT_OUTPUT_DIR.into(), grid_max: None, grid_step: None },
            Some(_) => parse_output(&doc, get_table(&doc, &root, "", "output")?)?,
        };
        Ok(ExperimentConfig { model, command, output, seed })
    }
}

fn get_str<'t>(doc: &Document, table: &'t Table, prefix: &str, key: &str) -> Result<Option<&'t str>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.as_str())),
        Some(_) => Err(doc.error(&join(prefix, key), "expected a string")),
    }
}

/// Nonnegative integer no smaller than `min`.
fn get_count(doc: &Document, table: &Table, prefix: &str, key: &str, min: i64) -> Result<u64> {
    let path = join(prefix, key);
    match table.get(key) {
        Some(Value::Integer(i)) if *i >= min => Ok(*i as u64),
        Some(Value::Integer(i)) => Err(doc.error(&path, format!("must be at least {min}, got {i}"))),
        Some(_) => Err(doc.error(&path, "expected an integer")),
        None => Err(doc.error(&path, "missing required key")),
    }
}

fn count_or(doc: &Document, table: &Table, prefix: &str, key: &str, min: i64, default: u64) -> Result<u64> {
    if table.contains_key(key) {
        get_count(doc, table, prefix, key, min)
    } else {
        Ok(default)
    }
}

fn positive_or(doc: &Document, table: &Table, prefix: &str, key: &str, default: f64) -> Result<f64> {
    if !table.contains_key(key) {
        return Ok(default);
    }
    let v = get_f64(doc, table, prefix, key)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(doc.error(&join(prefix, key), format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn list_or(doc: &Document, table: &Table, prefix: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    let v = if table.contains_key(key) { get_f64_list(doc, table, prefix, key)? } else { default.to_vec() };
    if v.is_empty() {
        return Err(doc.error(&join(prefix, key), "must not be empty"));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(doc.error(&join(prefix, key), format!("entries must be finite, got {x}")));
    }
    Ok(v)
}

fn nonnegative(doc: &Document, prefix: &str, key: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| **x < 0.0) {
        Some(x) => Err(doc.error(&join(prefix, key), format!("entries must be nonnegative, got {x}"))),
        None => Ok(()),
    }
}

fn parse_command(doc: &Document, t: &Table) -> Result<Command> {
    let p = "command";
    let name = get_str(doc, t, p, "name")?.ok_or_else(|| doc.error("command.name", "missing required key"))?;
    let allowed: &[&str] = match name {
        "ruin" => &["name", "u", "paths", "batches", "method", "n_se"],
        "limits" => &["name", "ladder_samples", "time_edges", "quintuple_points"],
        "validate" => &["name", "paths", "excursions", "n_se"],
        "edpf" => &["name", "lambda_p", "eta", "delta", "mc_u", "mc_paths", "batches", "n_se"],
        other => {
            return Err(doc.error("command.name", format!("unknown command `{other}` (ruin, limits, validate or edpf)")))
        }
    };
    reject_unknown(doc, t, p, allowed)?;
    let n_se = positive_or(doc, t, p, "n_se", 3.0)?;
    Ok(match name {
        "ruin" => {
            let u = get_f64_list(doc, t, p, "u")?;
            if u.is_empty() {
                return Err(doc.error("command.u", "must not be empty"));
            }
            if let Some(x) = u.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(doc.error("command.u", format!("reserves must be finite and nonnegative, got {x}")));
            }
            let batches = count_or(doc, t, p, "batches", 2, 10)?;
            let paths = count_or(doc, t, p, "paths", 1, 100_000)?;
            let method = match get_str(doc, t, p, "method")? {
                None => Method::Plain,
                Some(s) => s.parse().map_err(|e: Error| doc.error("command.method", e.to_string()))?,
            };
            Command::Ruin(RuinSpec { u, paths, batches, method, n_se })
        }
        "limits" => {
            let time_edges = list_or(doc, t, p, "time_edges", &[0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])?;
            nonnegative(doc, p, "time_edges", &time_edges)?;
            if time_edges.windows(2).any(|w| !(w[1] > w[0])) || time_edges.len() < 2 {
                return Err(doc.error("command.time_edges", "needs at least two strictly increasing edges"));
            }
            Command::Limits(LimitsSpec {
                ladder_samples: count_or(doc, t, p, "ladder_samples", 2, 2_000)?,
                time_edges,
                quintuple_points: count_or(doc, t, p, "quintuple_points", 2, 11)? as usize,
            })
        }
        "validate" => Command::Validate(ValidateSpec {
            paths: count_or(doc, t, p, "paths", 1, 100_000)?,
            excursions: count_or(doc, t, p, "excursions", 1, 100_000)?,
            n_se,
        }),
        _ => {
            let delta = list_or(doc, t, p, "delta", &[0.0])?;
            nonnegative(doc, p, "delta", &delta)?;
            let mc_u = if t.contains_key("mc_u") { Some(positive_or(doc, t, p, "mc_u", 0.0)?) } else { None };
            Command::Edpf(EdpfSpec {
                lambda_p: list_or(doc, t, p, "lambda_p", &[0.0])?,
                eta: list_or(doc, t, p, "eta", &[0.0])?,
                delta,
                mc_u,
                mc_paths: count_or(doc, t, p, "mc_paths", 0, 20_000)?,
                batches: count_or(doc, t, p, "batches", 2, 10)?,
                n_se,
            })
        }
    })
}

fn parse_output(doc: &Document, t: &Table) -> Result<OutputSpec> {
    let p = "output";
    reject_unknown(doc, t, p, &["format", "path", "grid_max", "grid_step"])?;
    let format = match get_str(doc, t, p, "format")? {
        None => Format::Csv,
        Some(s) => s.parse().map_err(|e: Error| doc.error("output.format", e.to_string()))?,
    };
    let path = get_str(doc, t, p, "path")?.unwrap_or(DEFAULT_OUTPUT_DIR).into();
    let grid_max = if t.contains_key("grid_max") { Some(positive_or(doc, t, p, "grid_max", 0.0)?) } else { None };
    let grid_step = if t.contains_key("grid_step") { Some(positive_or(doc, t, p, "grid_step", 0.0)?) } else { None };
    if let (Some(m), Some(s)) = (grid_max, grid_step) {
        if s > m {
            return Err(doc.error("output.grid_step", format!("step {s} exceeds grid_max {m}")));
        }
    }
    Ok(OutputSpec { format, path, grid_max, grid_step })
}
