//! JSON and CSV report writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::ReportFormat;

/// Opens `path`, or stdout when `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(value: &T, mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(rows: &[T], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Flattens one JSON object into a CSV header and row. Nested arrays are
/// joined with `;`, nested objects are prefixed `parent.child`.
pub fn object_to_csv(value: &Value, w: impl Write) -> Result<()> {
    let mut cols = Vec::new();
    flatten("", value, &mut cols);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(cols.iter().map(|(k, _)| k.as_str()))?;
    wtr.write_record(cols.iter().map(|(_, v)| v.as_str()))?;
    wtr.flush()?;
    Ok(())
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(";"),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

pub fn write_report<T: Serialize>(value: &T, format: ReportFormat, w: impl Write) -> Result<()> {
    match format {
        ReportFormat::Json => write_json(value, w),
        ReportFormat::Csv => object_to_csv(&serde_json::to_value(value)?, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattens_nested_values() {
        let v = serde_json::json!({"a": 1, "b": {"c": [1, 2]}, "d": "x,y"});
        let mut buf = Vec::new();
        object_to_csv(&v, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b.c,d\n1,1;2,\"x,y\"\n");
    }
}
