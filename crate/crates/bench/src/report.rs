//! CSV tables and the JSON run manifest written next to them.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::experiment::ReferenceSource;
use crate::BenchError;

pub fn write_csv<T: Serialize>(out: impl io::Write, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_csv<T: DeserializeOwned>(input: impl io::Read) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_csv(fs::File::create(path)?, rows)
}

/// `results.csv` -> `results.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn reference_json(r: &ReferenceSource) -> Value {
    match r {
        ReferenceSource::Exact => json!({ "kind": "exact" }),
        ReferenceSource::Cached {
            path,
            steps,
            doubling_change,
        } => json!({
            "kind": "cached",
            "path": path.display().to_string(),
            "N": steps,
            "doubling_change": doubling_change,
        }),
    }
}

/// Run metadata: the command, its parameters and the library version.
pub fn manifest(command: &str, params: Value) -> Value {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "tool": "exprb-bench",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "created_unix": created,
        "params": params,
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), BenchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
