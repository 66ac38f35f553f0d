//! Writing report bundles as one table file per suite, a `verdicts` table
//! and a `bundle.json` with the configuration echo and environment stamp.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fio_hardy::experiment::{CheckVerdict, ReportBundle, Table, Value};
use fio_hardy::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

pub const VERDICT_COLUMNS: [&str; 7] = [
    "suite",
    "check",
    "measured",
    "relation",
    "limit",
    "passed",
    "provenance",
];

fn verdict_table(verdicts: &[&CheckVerdict]) -> Table {
    Table {
        columns: VERDICT_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows: verdicts
            .iter()
            .map(|v| {
                vec![
                    v.suite.name().into(),
                    v.check.as_str().into(),
                    v.measured.into(),
                    match v.relation {
                        fio_hardy::experiment::Relation::AtMost => "at-most",
                        fio_hardy::experiment::Relation::AtLeast => "at-least",
                    }
                    .into(),
                    v.limit.into(),
                    v.passed.into(),
                    v.provenance.as_str().into(),
                ]
            })
            .collect(),
    }
}

/// Writes every suite table, the verdicts table and `bundle.json` into
/// `dir`, returning the written paths in order.
pub fn emit(bundle: &ReportBundle, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for report in &bundle.suites {
        let path = dir.join(format!("{}.{}", report.suite.name(), format.extension()));
        write_table(&report.table, format, &path)?;
        written.push(path);
    }
    let verdicts: Vec<&CheckVerdict> = bundle.verdicts().collect();
    let path = dir.join(format!("verdicts.{}", format.extension()));
    write_table(&verdict_table(&verdicts), format, &path)?;
    written.push(path);

    let path = dir.join("bundle.json");
    let summary = serde_json::json!({
        "config": bundle.config,
        "environment": bundle.environment,
        "suites": bundle.suites.iter().map(|s| serde_json::json!({
            "suite": s.suite.name(),
            "rows": s.table.rows.len(),
            "passed": s.passed(),
        })).collect::<Vec<_>>(),
        "passed": bundle.passed(),
    });
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Format(format!("bundle summary: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))?;
    written.push(path);
    Ok(written)
}

fn write_table(table: &Table, format: Format, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path.display().to_string(), e);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| Error::io(path.display().to_string(), e.into()))?;
            let csv_err = |e: csv::Error| Error::io(path.display().to_string(), e.into());
            w.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Value::render))
                    .map_err(csv_err)?;
            }
            w.flush().map_err(io)
        }
        Format::JsonLines => {
            let mut out = String::new();
            for row in &table.rows {
                let object: serde_json::Map<String, serde_json::Value> = table
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(json_value))
                    .collect();
                out.push_str(&serde_json::Value::Object(object).to_string());
                out.push('\n');
            }
            fs::write(path, out).map_err(io)
        }
    }
}

/// JSON form of a cell; floating-point values keep 12 significant digits
/// and non-finite values become strings.
fn json_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => (*i).into(),
        Value::Num(x) => {
            let text = v.render();
            match text
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
            {
                Some(n) if x.is_finite() => serde_json::Value::Number(n),
                _ => serde_json::Value::String(text),
            }
        }
        Value::Text(s) => s.as_str().into(),
        Value::Flag(b) => (*b).into(),
    }
}
