use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// Version of the report envelope layout.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Envelope<'a> {
    pub schema: u32,
    pub command: &'a str,
    pub version: &'a str,
    pub scenario_sha256: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_name: Option<&'a str>,
    pub seed: u64,
    pub result: Value,
}

/// A CSV witness table written next to the report.
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }
}

/// Shortest round-trip form; `inf`, `-inf` and `NaN` are spelled out.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `<command>.json` and `<command>-<table>.csv` into `dir`.
pub fn write_all(dir: &Path, envelope: &Envelope, tables: &[Table]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(envelope).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(dir.join(format!("{}.json", envelope.command)), text)?;
    for t in tables {
        t.write(&dir.join(format!("{}-{}.csv", envelope.command, t.name)))?;
    }
    Ok(())
}
