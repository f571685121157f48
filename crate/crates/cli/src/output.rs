//! Rendering of command results as text, JSON or CSV.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::{Map, Value};

pub const SCHEMA: &str = "bellcert.report/1";
pub const SIG_DIGITS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

/// `x` with ten significant digits: positional notation for moderate
/// magnitudes, scientific otherwise.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (_, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..10).contains(&exp) {
        format!("{:.*}", (SIG_DIGITS as i32 - 1 - exp) as usize, x)
    } else {
        sci
    }
}

/// `x` rounded to ten significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("round trip")
    } else {
        x
    }
}

/// Rounds every non-integer number in a JSON tree.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// A command result: header facts, a table, and the JSON payload.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub command: String,
    pub facts: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra JSON fields beyond facts and rows.
    pub json: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), ..Self::default() }
    }

    pub fn fact(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.facts.push((key.into(), value.into()));
        self
    }

    pub fn columns(&mut self, cols: &[&str]) -> &mut Self {
        self.columns = cols.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self
    }

    pub fn extra(&mut self, key: &str, value: Value) -> &mut Self {
        self.json.insert(key.into(), value);
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::Json => self.to_json(),
            Format::Csv => self.csv(),
        }
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let key_width = self.facts.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.facts {
            let _ = writeln!(out, "{k:<key_width$}  {}", v.render());
        }
        if !self.columns.is_empty() {
            if !self.facts.is_empty() {
                out.push('\n');
            }
            let rendered: Vec<Vec<String>> =
                self.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
            let widths: Vec<usize> = (0..self.columns.len())
                .map(|i| rendered.iter().map(|r| r[i].len()).chain([self.columns[i].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", line(self.columns.iter().map(String::as_str).collect()));
            for r in &rendered {
                let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
            }
        }
        out
    }

    fn csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::new();
        if self.columns.is_empty() {
            let _ = writeln!(out, "key,value");
            for (k, v) in &self.facts {
                let _ = writeln!(out, "{},{}", quote(k), quote(&v.render()));
            }
            return out;
        }
        let _ = writeln!(out, "{}", self.columns.iter().map(|c| quote(c)).collect::<Vec<_>>().join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.iter().map(|c| quote(&c.render())).collect::<Vec<_>>().join(","));
        }
        out
    }

    fn to_json(&self) -> String {
        let cell = |c: &Cell| match c {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
        };
        let mut root = Map::new();
        root.insert("schema".into(), SCHEMA.into());
        root.insert("command".into(), self.command.clone().into());
        for (k, v) in &self.facts {
            root.insert(k.clone(), cell(v));
        }
        if !self.columns.is_empty() {
            let rows = self
                .rows
                .iter()
                .map(|r| {
                    Value::Object(self.columns.iter().cloned().zip(r.iter().map(cell)).collect())
                })
                .collect();
            root.insert("rows".into(), Value::Array(rows));
        }
        for (k, v) in &self.json {
            root.insert(k.clone(), v.clone());
        }
        let mut text = serde_json::to_string_pretty(&round_json(Value::Object(root))).expect("JSON values serialize");
        text.push('\n');
        text
    }
}
