use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// Writes to `path`, or to stdout when no path is given.
pub fn emit_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Serializes rows to CSV with a header line.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Shortest round-trip representation, in exponent form for very small or
/// very large magnitudes.
pub fn fmt(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && m.is_finite() && !(1e-4..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
