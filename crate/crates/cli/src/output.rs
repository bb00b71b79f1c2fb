use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => shortest(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Shortest decimal that round-trips; exponent form outside `[1e-4, 1e15)`.
pub fn shortest(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($crate::output::Cell::from($v)),*] };
}

/// Command parameters plus run facts, as ordered `key=value` pairs.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, params: &impl Serialize) -> Self {
        let mut m = Manifest::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        if let Ok(Value::Object(map)) = serde_json::to_value(params) {
            for (k, v) in map {
                let text = match v {
                    Value::String(s) => s,
                    Value::Null => "none".into(),
                    other => other.to_string(),
                };
                m.push(&k, text);
            }
        }
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_owned(), value.to_string()));
    }
}

pub struct Table {
    pub manifest: Manifest,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Set when some numeric step missed its tolerance.
    pub converged: bool,
}

impl Table {
    pub fn new(manifest: Manifest, columns: &[&'static str]) -> Self {
        Self {
            manifest,
            columns: columns.to_vec(),
            rows: Vec::new(),
            converged: true,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push(key, value);
    }

    pub fn require(&mut self, converged: bool) {
        self.converged &= converged;
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.manifest.entries {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let manifest: serde_json::Map<String, Value> =
            self.manifest.entries.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({ "manifest": manifest, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serialises");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn emit(table: &Table, format: Format, out: Option<&Path>) -> std::io::Result<()> {
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct P {
        h: f64,
        name: &'static str,
    }

    fn sample() -> Table {
        let mut t = Table::new(Manifest::new("demo", &P { h: 0.1, name: "a" }), &["x", "y"]);
        t.push(row![0.1 + 0.2, "ok"]);
        t.push(row![f64::NAN, 3usize]);
        t
    }

    #[test]
    fn csv_has_manifest_and_round_trip_numbers() {
        let csv = sample().to_csv();
        assert!(csv.starts_with("# command=demo\n# version="));
        assert!(csv.contains("# h=0.1\n# name=a\n"));
        assert!(csv.contains("0.30000000000000004,ok"));
        assert!(csv.contains("NaN,3"));
        assert_eq!(shortest(8.3e-16), "8.3e-16");
        assert_eq!(shortest(-0.25), "-0.25");
        assert_eq!(shortest(1e300).parse::<f64>().unwrap(), 1e300);
    }

    #[test]
    fn json_matches_csv_numbers() {
        let doc: Value = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(doc["rows"][0][0].as_f64().unwrap(), 0.1 + 0.2);
        assert_eq!(doc["manifest"]["h"], "0.1");
        assert_eq!(doc["columns"][1], "y");
    }
}
