//! Command-line entry point.
//!
//! An experiment file names a model and one command (`ruin`, `limits`,
//! `validate` or `edpf`); the command produces tables that are written to the
//! output directory as CSV or JSON. Every file starts with a provenance line
//! naming the tool version, model fingerprint, seed and the formulas used.
//!
//! Exit codes: 0 on success, 1 when the run cannot proceed (bad config,
//! invalid parameters, I/O), 2 when it ran but a tolerance check failed or
//! lacked the power to decide.

mod commands;
mod config;
mod validate;

pub use commands::{cmd_edpf, cmd_limits, cmd_ruin};
pub use config::{
    Command, EdpfSpec, ExperimentConfig, Format, LimitsSpec, OutputSpec, RuinSpec, ValidateSpec, DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
};
pub use validate::{cmd_validate, CheckStatus, MIN_EFFECTIVE_SAMPLES};

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable for the worker count, read only when `--workers` is absent.
pub const WORKERS_ENV: &str = "RUINLAB_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    /// Bitwise equality for numbers, so NaN equals NaN.
    pub fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => a.to_bits() == b.to_bits(),
            (Cell::Text(a), Cell::Text(b)) => a == b,
            _ => false,
        }
    }

    fn render(&self) -> String {
        match self {
            // shortest representation that parses back to the same bits
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name; text cells become NaN.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column(name)?;
        Some(self.rows.iter().map(|r| if let Cell::Num(v) = r[j] { v } else { f64::NAN }).collect())
    }

    pub fn same(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }
}

/// Tables produced by one command, plus the reasons it failed a check.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub formulas: Vec<&'static str>,
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_TOLERANCE
        }
    }
}

pub fn provenance(config: &ExperimentConfig, report: &Report) -> String {
    format!(
        "ruinlab {VERSION} command={} model={} seed={} formulas={}",
        report.command,
        config.model.fingerprint(),
        config.seed,
        report.formulas.join(";")
    )
}

pub fn write_table_csv<W: Write>(mut out: W, provenance: &str, table: &Table) -> Result<()> {
    writeln!(out, "# {provenance}")?;
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&table.columns).map_err(fmt)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table_csv`]; returns the provenance line too.
pub fn read_table_csv<R: Read>(input: R, name: &str) -> Result<(String, Table)> {
    let mut reader = std::io::BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let provenance = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing provenance line".into()))?
        .trim_end()
        .to_string();
    let mut rd = csv::Reader::from_reader(reader);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let columns: Vec<String> = rd.headers().map_err(fmt)?.iter().map(String::from).collect();
    let mut table = Table { name: name.to_string(), columns, rows: Vec::new() };
    for rec in rd.records() {
        let rec = rec.map_err(fmt)?;
        table.rows.push(rec.iter().map(|s| s.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(s.into()))).collect());
    }
    Ok((provenance, table))
}

pub fn table_to_json(provenance: &str, table: &Table) -> Result<String> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            Value::Array(
                r.iter()
                    .map(|c| match c {
                        Cell::Num(v) if v.is_finite() => json!(v),
                        Cell::Num(v) => json!(format!("{v:?}")),
                        Cell::Text(s) => json!({ "text": s }),
                    })
                    .collect(),
            )
        })
        .collect();
    let doc = json!({ "provenance": provenance, "table": table.name, "columns": table.columns, "rows": rows });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))
}

/// Inverse of [`table_to_json`]. Non-finite numbers travel as strings.
pub fn table_from_json(source: &str) -> Result<(String, Table)> {
    let bad = |m: &str| Error::Format(format!("table json: {m}"));
    let doc: Value = serde_json::from_str(source).map_err(|e| Error::Format(e.to_string()))?;
    let provenance = doc["provenance"].as_str().ok_or_else(|| bad("provenance"))?.to_string();
    let name = doc["table"].as_str().ok_or_else(|| bad("table"))?;
    let columns = doc["columns"]
        .as_array()
        .ok_or_else(|| bad("columns"))?
        .iter()
        .map(|c| c.as_str().map(String::from).ok_or_else(|| bad("column name")))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table { name: name.to_string(), columns, rows: Vec::new() };
    for row in doc["rows"].as_array().ok_or_else(|| bad("rows"))? {
        let cells = row
            .as_array()
            .ok_or_else(|| bad("row"))?
            .iter()
            .map(|c| match c {
                Value::Number(n) => n.as_f64().map(Cell::Num).ok_or_else(|| bad("number")),
                Value::String(s) => s.parse::<f64>().map(Cell::Num).map_err(|_| bad("number string")),
                Value::Object(o) => o.get("text").and_then(Value::as_str).map(|s| Cell::Text(s.into())).ok_or_else(|| bad("text")),
                _ => Err(bad("cell")),
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows.push(cells);
    }
    Ok((provenance, table))
}

/// Writes every table of the report to `dir` as `<name>.<format>`.
pub fn write_report(config: &ExperimentConfig, report: &Report, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let prov = provenance(config, report);
    let mut paths = Vec::new();
    for t in &report.tables {
        let path = dir.join(format!("{}.{}", t.name, format.as_str()));
        match format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_table_csv(&mut buf, &prov, t)?;
                fs::write(&path, buf)?;
            }
            Format::Json => fs::write(&path, table_to_json(&prov, t)? + "\n")?,
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Runs the configured command.
pub fn execute(config: &ExperimentConfig, workers: usize) -> Result<Report> {
    let workers = workers.max(1);
    match &config.command {
        Command::Ruin(spec) => cmd_ruin(config, spec, workers),
        Command::Limits(spec) => cmd_limits(config, spec, workers),
        Command::Validate(spec) => cmd_validate(config, spec, workers),
        Command::Edpf(spec) => cmd_edpf(config, spec, workers),
    }
}

#[derive(Debug, Parser)]
#[command(name = "ruinlab", version, about = "Ruin limits of Lévy insurance risk processes, analytic and simulated")]
pub struct Args {
    /// Optional check that the config runs this command (ruin, limits, validate, edpf).
    pub command: Option<String>,
    /// Experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to the environment variable, then to the core count.
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json; overrides the config.
    #[arg(long)]
    pub format: Option<Format>,
}

/// Loads the config and applies the command-line overrides.
pub fn load(args: &Args) -> Result<ExperimentConfig> {
    let source = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config { key: "<file>".into(), line: None, message: format!("{}: {e}", args.config.display()) })?;
    let mut config = ExperimentConfig::parse(&source)?;
    if let Some(name) = &args.command {
        if name != config.command.name() {
            return Err(Error::Config {
                key: "command.name".into(),
                line: None,
                message: format!("command line asks for `{name}`, config defines `{}`", config.command.name()),
            });
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output.path = out.clone();
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    Ok(config)
}

/// Parses arguments, runs, writes the outputs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let run = || -> Result<i32> {
        let config = load(&args)?;
        let report = execute(&config, workers)?;
        let paths = write_report(&config, &report, &config.output.path, config.output.format)?;
        for p in &paths {
            println!("wrote {}", p.display());
        }
        for f in &report.failures {
            eprintln!("check failed: {f}");
        }
        Ok(report.exit_code())
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
