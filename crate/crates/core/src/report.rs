//! Deterministic CSV and JSON report writing.
//!
//! Rows are emitted in fixed orders and floats are printed with 17
//! significant digits, so identical configurations and seeds produce
//! byte-identical files regardless of thread count.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Version tag stamped into every JSON report.
pub const SCHEMA_VERSION: &str = "1";

/// Fixed float formatting: 17 significant digits round-trip `f64` exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Write one CSV file with a header row; every row must match its width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Config(format!(
                "csv row width {} does not match header width {}",
                row.len(),
                header.len()
            )));
        }
    }
    ensure_parent(path)?;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write one pretty-printed JSON report (struct fields serialize in
/// declaration order, keeping the output stable).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("json serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
