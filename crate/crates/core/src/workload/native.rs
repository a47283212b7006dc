//! Line-delimited JSON format for synthesized workloads.
//!
//! One [`JobSpec`] object per line, each tagged with `"schema_version": 1`.
//! Blank lines are ignored.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::JobSpec;
use crate::{Error, Result};

pub const NATIVE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NativeRecord {
    schema_version: u32,
    #[serde(flatten)]
    spec: JobSpec,
}

#[derive(Serialize)]
struct NativeRecordRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    spec: &'a JobSpec,
}

pub fn parse_native(text: &str) -> Result<Vec<JobSpec>> {
    let mut specs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NativeRecord =
            serde_json::from_str(line).map_err(|e| Error::Schema { line: line_no, message: e.to_string() })?;
        if rec.schema_version != NATIVE_SCHEMA_VERSION {
            return Err(Error::Schema {
                line: line_no,
                message: format!("unsupported schema_version {}", rec.schema_version),
            });
        }
        rec.spec.validate(crate::Secs::MAX).map_err(|message| Error::Schema { line: line_no, message })?;
        specs.push(rec.spec);
    }
    Ok(specs)
}

pub fn read_native(path: impl AsRef<Path>) -> Result<Vec<JobSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_native(&text)
}

pub fn write_native(specs: &[JobSpec], mut out: impl Write) -> Result<()> {
    for spec in specs {
        serde_json::to_writer(&mut out, &NativeRecordRef { schema_version: NATIVE_SCHEMA_VERSION, spec })?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn to_native_string(specs: &[JobSpec]) -> String {
    let mut buf = Vec::new();
    write_native(specs, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
