use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::Value;

use super::experiments::ExperimentReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::Config(format!("unknown format {s:?} (json or csv)"))),
        }
    }
}

/// Decimal with 17 significant digits; non-finite values become `null`.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_number(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_json(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}]", "  ".repeat(indent));
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                let _ = write!(out, "{pad}{}: ", Value::String(k.clone()));
                write_json(out, item, indent + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}}}", "  ".repeat(indent));
        }
        other => out.push_str(&scalar(other)),
    }
}

fn as_value(report: &ExperimentReport) -> Result<Value> {
    serde_json::to_value(report).map_err(|e| Error::Config(e.to_string()))
}

/// A JSON array with one object per experiment.
pub fn to_json(reports: &[ExperimentReport]) -> Result<String> {
    let values = reports.iter().map(as_value).collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    write_json(&mut out, &Value::Array(values), 0);
    out.push('\n');
    Ok(out)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, item)| flatten(&key(k), item, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, item)| flatten(&key(&i.to_string()), item, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

/// One CSV row per experiment over the union of flattened field names.
pub fn to_csv(reports: &[ExperimentReport]) -> Result<String> {
    let rows: Vec<Vec<(String, String)>> = reports
        .iter()
        .map(|r| {
            let mut row = Vec::new();
            flatten("", &as_value(r)?, &mut row);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut columns: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, _) in rows.iter().flatten() {
        if seen.insert(k.clone()) {
            columns.push(k.clone());
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(&columns).map_err(io)?;
    for row in &rows {
        let record: Vec<&str> = columns
            .iter()
            .map(|c| row.iter().find(|(k, _)| k == c).map_or("", |(_, v)| v.as_str()))
            .collect();
        w.write_record(&record).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(f64::NAN), "null");
        let back: f64 = format_number(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }
}
