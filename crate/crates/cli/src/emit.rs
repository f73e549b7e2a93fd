//! Rendering of reports as JSON or CSV.

use std::io::Write;
use std::path::Path;

use fq_circle::ScaledCyclotomic;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A structured result: a JSON object plus, for scans, a table with fixed
/// column headers.
#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub body: Value,
    pub table: Option<Table>,
}

#[derive(Clone, Debug)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Value>,
}

impl Table {
    pub fn new<T: Serialize>(headers: &[&str], rows: &[T]) -> Result<Self, CliError> {
        let rows = rows.iter().map(serde_json::to_value).collect::<Result<Vec<_>, _>>()?;
        Ok(Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows })
    }
}

impl Report {
    pub fn new<T: Serialize>(command: &str, body: &T) -> Result<Self, CliError> {
        Ok(Report { command: command.to_string(), body: serde_json::to_value(body)?, table: None })
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    /// The JSON document: `schema_version` and `command` first, then the
    /// body fields in declaration order.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        out.insert("command".into(), Value::from(self.command.clone()));
        match &self.body {
            Value::Object(m) => {
                for (k, v) in m {
                    out.insert(k.clone(), round_floats(v));
                }
            }
            other => {
                out.insert("result".into(), round_floats(other));
            }
        }
        Value::Object(out)
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json())?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.table {
            Some(t) => {
                w.write_record(&t.headers)?;
                for row in &t.rows {
                    w.write_record(t.headers.iter().map(|h| cell(row.get(h).unwrap_or(&Value::Null))))?;
                }
            }
            None => {
                let doc = self.to_json();
                let m = doc.as_object().expect("reports are objects");
                w.write_record(m.keys())?;
                w.write_record(m.values().map(cell))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, format: Format, output: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format)?;
        match output {
            Some(path) => std::fs::write(path, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| Value::from(round12(x))).unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.iter().map(round_floats).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), round_floats(x))).collect()),
        other => other.clone(),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) if n.is_f64() => round12(n.as_f64().unwrap()).to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => round_floats(other).to_string(),
    }
}

/// An exact value together with its complex embedding.
#[derive(Clone, Debug, Serialize)]
pub struct Exact {
    pub exact: String,
    pub re: f64,
    pub im: f64,
}

impl From<&ScaledCyclotomic> for Exact {
    fn from(v: &ScaledCyclotomic) -> Self {
        let (re, im) = v.to_complex();
        // the embedding sums roots of unity in floating point; clear the
        // rounding residue so exact zeros print as zero
        let tol = 1e-9 * re.abs().max(im.abs()).max(1.0);
        let snap = |x: f64| if x.abs() < tol { 0.0 } else { x };
        Exact { exact: v.to_string(), re: snap(re), im: snap(im) }
    }
}
