//! Rendering of command results as JSON, CSV, or an aligned table.

use serde::Serialize;
use serde_json::Value;

use crate::cli::Format;

pub struct Report {
    pub json: Value,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Format used when `--format` is absent.
    pub default_format: Format,
}

impl Report {
    /// A single-record report whose table has one `field,value` row per key.
    pub fn record<T: Serialize>(value: &T) -> Self {
        let json = serde_json::to_value(value).expect("report values serialize");
        let rows = match &json {
            Value::Object(map) => map.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
            other => vec![vec!["value".into(), cell(other)]],
        };
        Self {
            json,
            headers: vec!["field".into(), "value".into()],
            rows,
            default_format: Format::Json,
        }
    }

    pub fn table(json: Value, headers: &[&str], rows: Vec<Vec<String>>, default_format: Format) -> Self {
        Self {
            json,
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
            default_format,
        }
    }

    pub fn render(&self, format: Option<Format>) -> String {
        match format.unwrap_or(self.default_format) {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("json");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = self.headers.join(",");
                s.push('\n');
                for r in &self.rows {
                    let fields: Vec<String> = r.iter().map(|f| csv_field(f)).collect();
                    s.push_str(&fields.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Human => {
                let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
                for r in &self.rows {
                    for (w, f) in widths.iter_mut().zip(r) {
                        *w = (*w).max(f.chars().count());
                    }
                }
                let line = |cells: &[String]| {
                    let padded: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect();
                    padded.join("  ").trim_end().to_string() + "\n"
                };
                let mut s = line(&self.headers);
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                s.push_str(&line(&rule));
                for r in &self.rows {
                    s.push_str(&line(r));
                }
                s
            }
        }
    }
}

/// Compact text for a JSON value inside a table cell.
pub fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(f: &str) -> String {
    if f.contains([',', '"', '\n']) {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}
