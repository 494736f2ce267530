//! Result records and their line-oriented serialization.

use asep_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub input: Value,
    pub value: f64,
    pub est_err: f64,
    pub method: String,
    pub evaluations: u64,
    /// Seconds spent; absent when timing is disabled.
    pub wall_clock_s: Option<f64>,
    pub version: String,
    pub seed: Option<u64>,
    /// Command-specific extras (tables, identity reports, Monte Carlo counts).
    pub details: Option<Value>,
}

/// One row of a probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub positions: Vec<i64>,
    pub species: Vec<u8>,
    pub probability: f64,
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    let _ = write!(out, "{x:.16e}");
                } else {
                    out.push_str("null");
                }
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(x, out);
            }
            out.push('}');
        }
    }
}

/// Serialize any value as one JSON line: keys sorted, floats with 17 significant digits.
pub fn to_line<T: Serialize>(x: &T) -> Result<String> {
    let v = serde_json::to_value(x).map_err(|e| Error::InvalidInput(format!("serialization: {e}")))?;
    let mut s = String::new();
    write_value(&v, &mut s);
    Ok(s)
}

impl ResultRecord {
    pub fn to_line(&self) -> Result<String> {
        to_line(self)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::InvalidInput(format!("record: {e}")))
    }

    /// Copy with the float fields of `input` and `details` normalized through the line format,
    /// so that a record compares equal to its own round trip.
    pub fn normalized(&self) -> Result<Self> {
        Self::from_line(&self.to_line()?)
    }
}

/// CSV text for a table: one header line, one row per configuration.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("positions,species,probability\n");
    for r in rows {
        let pos: Vec<String> = r.positions.iter().map(i64::to_string).collect();
        let sp: Vec<String> = r.species.iter().map(u8::to_string).collect();
        let _ = writeln!(s, "{},{},{:.16e}", pos.join(" "), sp.join(" "), r.probability);
    }
    s
}

/// CSV text for scalar records.
pub fn records_csv(records: &[ResultRecord]) -> String {
    let mut s = String::from("command,value,est_err,method\n");
    for r in records {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{}", r.command, r.value, r.est_err, r.method);
    }
    s
}
