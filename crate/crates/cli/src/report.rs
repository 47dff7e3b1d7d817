//! Report assembly, output and `--assert` checks.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

pub const SCHEMA: u64 = 1;

/// Rows for CSV output; cells are already formatted.
#[derive(Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

pub fn cell<T: ToString>(x: T) -> String {
    x.to_string()
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// What a subcommand produced. `error` is set when the run stopped early;
/// `result` then holds everything finished before the failure.
pub struct Outcome {
    pub result: Value,
    pub table: Table,
    pub error: Option<anyhow::Error>,
}

impl Outcome {
    pub fn complete(result: Value, table: Table) -> Self {
        Outcome {
            result,
            table,
            error: None,
        }
    }
}

pub fn document(command: &str, config: Value, outcome: &Outcome) -> Value {
    let mut doc = json!({
        "schema": SCHEMA,
        "command": command,
        "partial": outcome.error.is_some(),
        "config": config,
        "result": outcome.result,
    });
    if let Some(e) = &outcome.error {
        doc["error"] = Value::String(format!("{e:#}"));
    }
    doc
}

/// JSON unless `out` ends in `.csv`; standard output when `out` is absent.
pub fn write(out: Option<&Path>, doc: &Value, table: &Table) -> Result<()> {
    let csv_out = out.is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    let bytes = if csv_out {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.headers)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        let mut bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
        if doc["partial"] == Value::Bool(true) {
            bytes.extend_from_slice(b"# partial: true\n");
        }
        bytes
    } else {
        let mut s = serde_json::to_string_pretty(doc)?;
        s.push('\n');
        s.into_bytes()
    };
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

#[derive(Debug, Deserialize)]
struct Expectations {
    checks: Vec<Check>,
}

/// One expectation. `path` is dotted, with array indices as numbers and a
/// trailing `#` for an array length.
#[derive(Debug, Deserialize)]
struct Check {
    path: String,
    #[serde(default)]
    value: Option<Value>,
    #[serde(default)]
    tol: f64,
    #[serde(default)]
    min: Option<f64>,
    #[serde(default)]
    max: Option<f64>,
}

fn lookup(doc: &Value, path: &str) -> Option<Value> {
    let (path, len) = match path.strip_suffix('#') {
        Some(p) => (p, true),
        None => (path, false),
    };
    let mut cur = doc;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        cur = match cur {
            Value::Array(a) => a.get(seg.parse::<usize>().ok()?)?,
            Value::Object(o) => o.get(seg)?,
            _ => return None,
        };
    }
    if len {
        Some(Value::from(cur.as_array()?.len()))
    } else {
        Some(cur.clone())
    }
}

/// Failed checks, one message each.
pub fn check(doc: &Value, expectations: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(expectations)
        .with_context(|| format!("cannot read {}", expectations.display()))?;
    let exp: Expectations = serde_json::from_str(&text)
        .with_context(|| format!("bad expectation file {}", expectations.display()))?;
    if exp.checks.is_empty() {
        bail!("expectation file {} has no checks", expectations.display());
    }
    let mut failures = Vec::new();
    for c in &exp.checks {
        let Some(actual) = lookup(doc, &c.path) else {
            failures.push(format!("{}: missing", c.path));
            continue;
        };
        if let Some(want) = &c.value {
            let ok = match (want.as_f64(), actual.as_f64()) {
                (Some(w), Some(a)) => (a - w).abs() <= c.tol,
                _ => *want == actual,
            };
            if !ok {
                failures.push(format!(
                    "{}: expected {want} (tol {}), got {actual}",
                    c.path, c.tol
                ));
            }
        }
        for (bound, is_min) in [(c.min, true), (c.max, false)] {
            let Some(b) = bound else { continue };
            match actual.as_f64() {
                Some(a) if (is_min && a >= b) || (!is_min && a <= b) => {}
                _ => failures.push(format!(
                    "{}: expected {} {b}, got {actual}",
                    c.path,
                    if is_min { ">=" } else { "<=" }
                )),
            }
        }
    }
    Ok(failures)
}
