//! Tabular reports: CSV with the manifest as `#` comments, or a JSON document.

use std::time::{SystemTime, UNIX_EPOCH};

use mcpc::montecarlo::ExperimentSpec;
use mcpc::SystemConfig;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: SystemConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
    pub seed: u64,
}

impl RunManifest {
    pub fn new(command: &'static str, config: SystemConfig, seed: u64) -> Self {
        Self {
            tool: "mcpc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            experiment: None,
            seed,
        }
    }
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("report types serialize")
}

pub fn render_csv(manifest: &RunManifest, table: &Table) -> Result<Vec<u8>, CliError> {
    let mut out = format!(
        "# {} {} {}\n# config: {}\n",
        manifest.tool,
        manifest.version,
        manifest.command,
        json(&manifest.config)
    );
    if let Some(spec) = &manifest.experiment {
        out.push_str(&format!("# experiment: {}\n", json(spec)));
    }
    out.push_str(&format!("# seed: {}\n", manifest.seed));
    let mut writer = csv::Writer::from_writer(out.into_bytes());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    writer.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(Cell::to_csv)).map_err(io)?;
    }
    writer.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn render_json(manifest: &RunManifest, table: &Table) -> Vec<u8> {
    let mut meta = serde_json::to_value(manifest).expect("manifest serializes");
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    meta["timestamp"] = Value::from(timestamp);
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), v.to_json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({
        "manifest": meta,
        "columns": table.columns,
        "rows": rows,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("report serializes");
    bytes.push(b'\n');
    bytes
}
