//! Key-value model files.
//!
//! ```toml
//! premium_rate = 2.0
//! claim_intensity = 1.0
//!
//! [claims]
//! kind = "exponential"
//!
//! [claims.params]
//! rate = 1.0
//! ```
//!
//! Errors carry the dotted key path and, when it can be located, the line.

use toml::{Table, Value};

use super::{ClaimDistribution, RiskModel};
use crate::error::{Error, Result};

/// Parsed document plus its source, for locating keys in error messages.
pub struct Document<'a> {
    pub source: &'a str,
    pub table: Table,
}

impl<'a> Document<'a> {
    pub fn parse(source: &'a str) -> Result<Self> {
        match source.parse::<Table>() {
            Ok(table) => Ok(Document { source, table }),
            Err(e) => {
                let line = e.span().map(|s| line_of_offset(source, s.start));
                Err(Error::Config {
                    key: "<syntax>".into(),
                    line,
                    message: e.message().trim().to_string(),
                })
            }
        }
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config { key: key.to_string(), line: locate_key(self.source, key), message: message.into() }
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line (1-based) on which a dotted key is assigned, following `[section]`
/// headers and dotted keys.
pub fn locate_key(src: &str, path: &str) -> Option<usize> {
    let mut section = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').trim_end_matches(']').trim();
            section = name.to_string();
            if section == path {
                return Some(i + 1);
            }
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            let k = k.trim().trim_matches('"');
            let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if full == path {
                return Some(i + 1);
            }
        }
    }
    None
}

pub(crate) fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

pub(crate) fn get_table<'t>(doc: &Document, table: &'t Table, prefix: &str, key: &str) -> Result<&'t Table> {
    match table.get(key) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(doc.error(&join(prefix, key), "expected a table")),
        None => Err(doc.error(&join(prefix, key), "missing required section")),
    }
}

pub(crate) fn get_f64(doc: &Document, table: &Table, prefix: &str, key: &str) -> Result<f64> {
    let path = join(prefix, key);
    match table.get(key) {
        Some(Value::Float(f)) => Ok(*f),
        Some(Value::Integer(i)) => Ok(*i as f64),
        Some(_) => Err(doc.error(&path, "expected a number")),
        None => Err(doc.error(&path, "missing required key")),
    }
}

pub(crate) fn get_positive(doc: &Document, table: &Table, prefix: &str, key: &str) -> Result<f64> {
    let v = get_f64(doc, table, prefix, key)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(doc.error(&join(prefix, key), format!("must be positive, got {v}")));
    }
    Ok(v)
}

pub(crate) fn get_f64_list(doc: &Document, table: &Table, prefix: &str, key: &str) -> Result<Vec<f64>> {
    let path = join(prefix, key);
    match table.get(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(doc.error(&path, "expected an array of numbers")),
            })
            .collect(),
        Some(_) => Err(doc.error(&path, "expected an array of numbers")),
        None => Err(doc.error(&path, "missing required key")),
    }
}

pub(crate) fn reject_unknown(doc: &Document, table: &Table, prefix: &str, allowed: &[&str]) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(doc.error(&join(prefix, key), "unknown key"));
        }
    }
    Ok(())
}

/// Reads a model from `table` whose keys live under `prefix` (empty for a
/// standalone model file).
pub fn model_from_table(doc: &Document, table: &Table, prefix: &str) -> Result<RiskModel> {
    reject_unknown(doc, table, prefix, &["premium_rate", "claim_intensity", "claims"])?;
    let c = get_positive(doc, table, prefix, "premium_rate")?;
    let lam = get_positive(doc, table, prefix, "claim_intensity")?;
    let claims_prefix = join(prefix, "claims");
    let claims_table = get_table(doc, table, prefix, "claims")?;
    reject_unknown(doc, claims_table, &claims_prefix, &["kind", "params"])?;
    let kind = match claims_table.get("kind") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(doc.error(&join(&claims_prefix, "kind"), "expected a string")),
        None => return Err(doc.error(&join(&claims_prefix, "kind"), "missing required key")),
    };
    let params_prefix = join(&claims_prefix, "params");
    let params = get_table(doc, claims_table, &claims_prefix, "params")?;
    let wrap = |key: &str, r: Result<ClaimDistribution>| {
        r.map_err(|e| doc.error(&join(&params_prefix, key), e.to_string()))
    };
    let claims = match kind {
        "exponential" => {
            reject_unknown(doc, params, &params_prefix, &["rate"])?;
            let rate = get_positive(doc, params, &params_prefix, "rate")?;
            wrap("rate", ClaimDistribution::exponential(rate))?
        }
        "gamma" => {
            reject_unknown(doc, params, &params_prefix, &["shape", "rate"])?;
            let shape = get_positive(doc, params, &params_prefix, "shape")?;
            let rate = get_positive(doc, params, &params_prefix, "rate")?;
            wrap("shape", ClaimDistribution::gamma(shape, rate))?
        }
        "mixed_exponential" => {
            reject_unknown(doc, params, &params_prefix, &["weights", "rates"])?;
            let weights = get_f64_list(doc, params, &params_prefix, "weights")?;
            let rates = get_f64_list(doc, params, &params_prefix, "rates")?;
            wrap("weights", ClaimDistribution::mixed_exponential(weights, rates))?
        }
        "tilted_pareto" => {
            reject_unknown(doc, params, &params_prefix, &["tilt", "power", "scale"])?;
            let tilt = get_f64(doc, params, &params_prefix, "tilt")?;
            let power = get_positive(doc, params, &params_prefix, "power")?;
            let scale = get_positive(doc, params, &params_prefix, "scale")?;
            wrap("tilt", ClaimDistribution::tilted_pareto(tilt, power, scale))?
        }
        other => {
            return Err(doc.error(
                &join(&claims_prefix, "kind"),
                format!("unknown claim kind `{other}` (expected exponential, gamma, mixed_exponential or tilted_pareto)"),
            ))
        }
    };
    RiskModel::new(c, lam, claims).map_err(|e| doc.error(&join(prefix, "premium_rate"), e.to_string()))
}

/// Parses a standalone model file.
pub fn parse_model(source: &str) -> Result<RiskModel> {
    let doc = Document::parse(source)?;
    let table = doc.table.clone();
    model_from_table(&doc, &table, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    const M1: &str = r#"
premium_rate = 2.0
claim_intensity = 1

[claims]
kind = "exponential"

[claims.params]
rate = 1.0
"#;

    #[test]
    fn parses_reference_model() {
        let m = parse_model(M1).unwrap();
        assert_eq!(m, crate::risk_model::reference::m1());
    }

    #[test]
    fn negative_rate_names_key_and_line() {
        let src = M1.replace("premium_rate = 2.0", "premium_rate = -2.0");
        match parse_model(&src) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "premium_rate");
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys() {
        let src = M1.replace("rate = 1.0", "rate = 1.0\nratee = 3");
        match parse_model(&src) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "claims.params.ratee");
                assert_eq!(line, Some(10));
            }
            other => panic!("unexpected {other:?}"),
        }
        let src = M1.replace("claim_intensity = 1\n", "");
        assert!(matches!(parse_model(&src), Err(Error::Config { key, .. }) if key == "claim_intensity"));
    }

    #[test]
    fn syntax_errors_report_line() {
        let src = "premium_rate = 2.0\nclaim_intensity = = 1\n";
        match parse_model(src) {
            Err(Error::Config { key, line, .. }) => {
                assert_eq!(key, "<syntax>");
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dotted_keys_are_located() {
        let src = "premium_rate = 0.5\nclaim_intensity = 1\nclaims.kind = \"tilted_pareto\"\nclaims.params.tilt = 1\nclaims.params.power = 3\nclaims.params.scale = 0.5\n";
        let m = parse_model(src).unwrap();
        assert_eq!(m, crate::risk_model::reference::m2());
        assert_eq!(locate_key(src, "claims.params.power"), Some(5));
    }

    #[test]
    fn drift_violation_is_a_config_error() {
        let src = M1.replace("premium_rate = 2.0", "premium_rate = 0.5");
        assert!(matches!(parse_model(&src), Err(Error::Config { .. })));
    }
}
