//! Table emission: RFC-4180 CSV with a `#` metadata block, or JSON with
//! one array per column.

use covprior::casestudies::CaseStudyReport;
use serde_json::{Map, Value};
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl OutTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything one run emits.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub metadata: Vec<(String, String)>,
    pub tables: Vec<OutTable>,
}

impl Output {
    pub fn from_report(metadata: Vec<(String, String)>, report: &CaseStudyReport) -> Self {
        let mut tables = Vec::new();
        if !report.scalars.is_empty() {
            let mut s = OutTable::new("scalars", &["name", "value"]);
            for (k, v) in &report.scalars {
                s.push(vec![k.as_str().into(), (*v).into()]);
            }
            tables.push(s);
        }
        for t in &report.tables {
            tables.push(OutTable {
                name: t.name.clone(),
                columns: t.columns.clone(),
                rows: t
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|&v| Cell::Num(v)).collect())
                    .collect(),
            });
        }
        Self { metadata, tables }
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut OutTable> {
        self.tables.iter_mut().find(|t| t.name == name)
    }
}

/// 17 significant digits; integral values below 2⁵³ print as integers.
pub fn format_float(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 {
        format!("{}", v as i64)
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn write_csv(out: &Output, w: &mut dyn Write) -> std::io::Result<()> {
    for (k, v) in &out.metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    for (i, t) in out.tables.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "# table: {}", t.name)?;
        let mut cw = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        cw.write_record(&t.columns)?;
        for r in &t.rows {
            cw.write_record(r.iter().map(Cell::csv))?;
        }
        let bytes = cw.into_inner().map_err(|e| e.into_error())?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn write_json(out: &Output, w: &mut dyn Write) -> std::io::Result<()> {
    let metadata: Map<String, Value> = out
        .metadata
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    let tables: Vec<Value> = out
        .tables
        .iter()
        .map(|t| {
            let mut cols = Map::new();
            for (j, c) in t.columns.iter().enumerate() {
                cols.insert(c.clone(), Value::Array(t.rows.iter().map(|r| r[j].json()).collect()));
            }
            let mut obj = Map::new();
            obj.insert("name".into(), Value::String(t.name.clone()));
            obj.insert(
                "columns".into(),
                Value::Array(t.columns.iter().cloned().map(Value::String).collect()),
            );
            obj.insert("data".into(), Value::Object(cols));
            Value::Object(obj)
        })
        .collect();
    let mut root = Map::new();
    root.insert("metadata".into(), Value::Object(metadata));
    root.insert("tables".into(), Value::Array(tables));
    serde_json::to_writer_pretty(&mut *w, &Value::Object(root))?;
    writeln!(w)
}
