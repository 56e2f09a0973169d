use qd_gates::metrics::format_significant;
use qd_gates::{Complex64, SpinState};
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Text(n.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, precision: usize) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Text(s) => csv_escape(s),
                    Cell::Num(x) => format_significant(*x, precision),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// The result of one command, renderable in every output format.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// Pre-rendered CSV, used instead of `table` when set.
    pub csv: Option<String>,
    /// Keep floats at full precision (circuit definitions, configs).
    pub exact: bool,
}

impl Report {
    pub fn new(json: Value) -> Self {
        Report {
            json,
            table: None,
            csv: None,
            exact: false,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn render(&self, format: Format, precision: usize) -> CliResult<String> {
        match format {
            Format::Json => {
                let value = if self.exact {
                    self.json.clone()
                } else {
                    round_value(&self.json, precision)
                };
                let mut text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
                text.push('\n');
                Ok(text)
            }
            Format::Csv => {
                if let Some(csv) = &self.csv {
                    return Ok(csv.clone());
                }
                self.table
                    .as_ref()
                    .map(|t| t.to_csv(precision))
                    .ok_or_else(|| CliError::usage("this command has no CSV output; use --format json or text"))
            }
            Format::Text => {
                let mut out = String::new();
                flatten(&self.json, "", precision, self.exact, &mut out);
                Ok(out)
            }
        }
    }
}

/// Rounds every non-integer number to `precision` significant digits.
pub fn round_value(v: &Value, precision: usize) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let rounded: f64 = format_significant(x, precision).parse().unwrap_or(x);
            json!(rounded)
        }
        Value::Array(items) => Value::Array(items.iter().map(|i| round_value(i, precision)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, i)| (k.clone(), round_value(i, precision)))
                .collect::<Map<_, _>>(),
        ),
        other => other.clone(),
    }
}

fn flatten(v: &Value, prefix: &str, precision: usize, exact: bool, out: &mut String) {
    let child = |key: &str| {
        if prefix.is_empty() {
            key.to_owned()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                flatten(item, &child(k), precision, exact, out);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(item, &format!("{prefix}[{i}]"), precision, exact, out);
            }
        }
        leaf => {
            let text = match leaf {
                Value::Number(n) if n.is_f64() && !exact => {
                    format_significant(n.as_f64().expect("f64 number"), precision)
                }
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(prefix);
            out.push_str(": ");
            out.push_str(&text);
            out.push('\n');
        }
    }
}

pub fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Amplitudes in basis order, spin 0 first in each label.
pub fn state_json(state: &SpinState) -> Value {
    Value::Array(
        state
            .iter()
            .map(|(config, amp)| json!({ "spins": config.to_string(), "re": amp.re, "im": amp.im }))
            .collect(),
    )
}
