use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::Failure;

/// Files produced by a command, written only after the command finished.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    /// Add a table given as CSV, converted to a JSON array of records when
    /// `format` is JSON.
    pub fn table(&mut self, stem: &str, format: Format, csv: Vec<u8>) -> Result<(), Failure> {
        match format {
            Format::Csv => self.files.push((format!("{stem}.csv"), csv)),
            Format::Json => self.files.push((format!("{stem}.json"), csv_to_json(&csv)?)),
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.files.push((name.to_string(), to_json(value)?));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Failure::Check(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Numeric cells become JSON numbers; everything else, `-inf` included,
/// stays a string.
fn csv_to_json(csv: &[u8]) -> Result<Vec<u8>, Failure> {
    let mut r = csv::Reader::from_reader(csv);
    let headers = r.headers().map_err(|e| Failure::Check(e.to_string()))?.clone();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Check(e.to_string()))?;
        let mut obj = Map::new();
        for (h, cell) in headers.iter().zip(rec.iter()) {
            let v = if let Ok(i) = cell.parse::<i64>() {
                Value::from(i)
            } else {
                match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or(Value::String(cell.into()), Value::Number),
                    _ => match cell {
                        "true" => Value::Bool(true),
                        "false" => Value::Bool(false),
                        _ => Value::String(cell.into()),
                    },
                }
            };
            obj.insert(h.to_string(), v);
        }
        rows.push(Value::Object(obj));
    }
    to_json(&rows)
}

#[derive(Serialize)]
struct Provenance<'a> {
    program: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    overrides: &'a BTreeMap<String, Value>,
    config: &'a RunConfig,
    outputs: Vec<String>,
}

/// Write the artifacts and the `provenance.json` sidecar into `cfg.out`.
pub fn write_all(cfg: &RunConfig, overrides: &BTreeMap<String, Value>, artifacts: &Artifacts) -> Result<(), Failure> {
    let dir: &Path = &cfg.out;
    let io = |e: std::io::Error| Failure::Check(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in &artifacts.files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
    }
    let record = Provenance {
        program: "kpzlab",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.map_or("", |c| c.as_str()),
        seed: cfg.seed,
        overrides,
        config: cfg,
        outputs: artifacts.names(),
    };
    std::fs::write(dir.join("provenance.json"), to_json(&record)?).map_err(io)
}
