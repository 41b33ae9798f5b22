//! Report documents. The JSON form is canonical; the text and TSV forms are
//! rendered from the same values with the same number formatter.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{CliError, CliResult};

/// Shortest round-trip decimal, the same text serde_json writes.
/// Non-finite values render as `null`.
pub fn fmt_num(v: f64) -> String {
    match Number::from_f64(v) {
        Some(n) => n.to_string(),
        None => "null".into(),
    }
}

pub fn num(v: f64) -> Value {
    Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// A plot-ready table: header names carry units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_tsv(&self, comment: &str) -> String {
        let mut out = String::new();
        for line in comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join("\t"));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(scalar_text).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("table serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            inputs: Value::Object(Map::new()),
            results: Value::Object(Map::new()),
            warnings: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, v: impl Into<Value>) {
        if let Value::Object(m) = &mut self.inputs {
            m.insert(key.into(), v.into());
        }
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        if let Value::Object(m) = &mut self.results {
            m.insert(key.into(), v.into());
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "relaxkit {}", self.command);
        out.push_str("\ninputs:\n");
        render(&self.inputs, 1, &mut out);
        out.push_str("\nresults:\n");
        render(&self.results, 1, &mut out);
        if !self.warnings.is_empty() {
            out.push_str("\nwarnings:\n");
            for w in &self.warnings {
                let _ = writeln!(out, "  - {w}");
            }
        }
        out
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn render(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(m) => {
            if let (Some(Value::Array(cols)), Some(Value::Array(rows))) =
                (m.get("columns"), m.get("rows"))
            {
                let header: Vec<String> = cols.iter().map(scalar_text).collect();
                let _ = writeln!(out, "{pad}{}", header.join("\t"));
                for row in rows {
                    if let Value::Array(cells) = row {
                        let cells: Vec<String> = cells.iter().map(scalar_text).collect();
                        let _ = writeln!(out, "{pad}{}", cells.join("\t"));
                    }
                }
                return;
            }
            for (k, val) in m {
                if is_scalar(val) {
                    let _ = writeln!(out, "{pad}{k}: {}", scalar_text(val));
                } else if matches!(val, Value::Array(a) if a.iter().all(is_scalar)) {
                    let items: Vec<String> =
                        val.as_array().unwrap().iter().map(scalar_text).collect();
                    let _ = writeln!(out, "{pad}{k}: [{}]", items.join(", "));
                } else {
                    let _ = writeln!(out, "{pad}{k}:");
                    render(val, depth + 1, out);
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                if is_scalar(item) {
                    let _ = writeln!(out, "{pad}- {}", scalar_text(item));
                } else {
                    let _ = writeln!(out, "{pad}-");
                    render(item, depth + 1, out);
                }
            }
        }
        scalar => {
            let _ = writeln!(out, "{pad}{}", scalar_text(scalar));
        }
    }
}

/// Writes `<prefix>.json`, `<prefix>.txt` and, when given, `<prefix>.tsv`.
pub fn write_outputs(
    prefix: &Path,
    report: &Report,
    table: Option<(&Table, &str)>,
) -> CliResult<()> {
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        std::path::PathBuf::from(p)
    };
    let write = |path: std::path::PathBuf, body: String| {
        std::fs::write(&path, body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    };
    write(with_ext(".json"), report.to_json())?;
    write(with_ext(".txt"), report.to_text())?;
    if let Some((t, comment)) = table {
        write(with_ext(".tsv"), t.to_tsv(comment))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_matches_json() {
        for v in [1e-10, 0.1, 33.85, 2.0402e-5, 300.0, -1.5e22] {
            assert_eq!(fmt_num(v), serde_json::to_string(&v).unwrap());
        }
        assert_eq!(fmt_num(f64::INFINITY), "null");
    }

    #[test]
    fn text_and_json_carry_identical_numbers() {
        let mut r = Report::new("demo");
        r.input("seed", 7);
        r.result("delta_meV", num(60.123456789));
        let mut t = Table::new(&["temperature_K", "T2_us"]);
        t.push(vec![num(170.0), num(1.4e-3)]);
        r.result("curve", t.to_value());
        let json = r.to_json();
        let text = r.to_text();
        for token in ["60.123456789", "170.0", "0.0014"] {
            assert!(json.contains(token), "{token} in json");
            assert!(text.contains(token), "{token} in text");
        }
        assert!(t.to_tsv("x").contains("170.0\t0.0014"));
    }
}
