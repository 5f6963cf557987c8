//! Rendering results as CSV, JSON or rounded plain text.

use std::io::Write;

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Pretty,
}

/// A command's result: a single record or a table of rows.
pub enum Report {
    Record(Value),
    Rows(Rows),
}

pub struct Rows {
    /// Written as `# key: value` lines above CSV output.
    pub comments: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Structured form used for JSON output.
    pub json: Value,
}

impl Report {
    pub fn default_format(&self) -> OutputFormat {
        match self {
            Report::Record(_) => OutputFormat::Json,
            Report::Rows(_) => OutputFormat::Csv,
        }
    }

    pub fn write(&self, format: OutputFormat, out: &mut dyn Write) -> std::io::Result<()> {
        match (self, format) {
            (Report::Record(v), OutputFormat::Json) | (Report::Rows(Rows { json: v, .. }), OutputFormat::Json) => {
                serde_json::to_writer_pretty(&mut *out, v)?;
                writeln!(out)
            }
            (Report::Record(v), OutputFormat::Csv) => {
                let mut flat = Vec::new();
                flatten("", v, &mut flat);
                let mut w = csv::Writer::from_writer(out);
                w.write_record(flat.iter().map(|(k, _)| k.as_str()))?;
                w.write_record(flat.iter().map(|(_, v)| cell(v, None)))?;
                w.flush()
            }
            (Report::Record(v), OutputFormat::Pretty) => {
                let mut flat = Vec::new();
                flatten("", v, &mut flat);
                let width = flat.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in flat {
                    writeln!(out, "{k:<width$}  {}", cell(&v, Some(3)))?;
                }
                Ok(())
            }
            (Report::Rows(r), OutputFormat::Csv) => {
                for (k, v) in &r.comments {
                    writeln!(out, "# {k}: {v}")?;
                }
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&r.columns)?;
                for row in &r.rows {
                    w.write_record(row.iter().map(|v| cell(v, None)))?;
                }
                w.flush()
            }
            (Report::Rows(r), OutputFormat::Pretty) => {
                for (k, v) in &r.comments {
                    writeln!(out, "{k}: {v}")?;
                }
                let body: Vec<Vec<String>> = r.rows.iter().map(|row| row.iter().map(|v| cell(v, Some(3))).collect()).collect();
                let widths: Vec<usize> = (0..r.columns.len())
                    .map(|j| body.iter().map(|row| row[j].len()).chain([r.columns[j].len()]).max().unwrap_or(0))
                    .collect();
                let line = |cells: &[String]| {
                    cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
                };
                writeln!(out, "{}", line(&r.columns))?;
                for row in &body {
                    writeln!(out, "{}", line(row))?;
                }
                Ok(())
            }
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// Text for one value; `decimals` rounds non-integer numbers.
pub fn cell(v: &Value, decimals: Option<usize>) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match (n.as_f64(), decimals) {
            (Some(x), Some(d)) if !(n.is_i64() || n.is_u64()) => format!("{x:.d$}"),
            _ => n.to_string(),
        },
        Value::Array(items) => items.iter().map(|x| cell(x, decimals)).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

/// Builds a JSON object from key/value pairs, keeping their order.
pub fn object<I: IntoIterator<Item = (&'static str, Value)>>(pairs: I) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}
