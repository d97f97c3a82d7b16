//! Shared serialization helpers: the plain-text matrix format, atomic file
//! writes, and content hashing for output manifests.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Renders a row-major matrix as text: a `rows cols` header line, then one
/// space-separated row per line with 17 significant digits, enough for exact
/// f64 round-trips.
pub fn matrix_to_text(rows: usize, cols: usize, data: &[f64]) -> String {
    assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
    let mut out = String::with_capacity(rows * cols * 26 + 16);
    out.push_str(&format!("{rows} {cols}\n"));
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:.16e}", data[r * cols + c]));
        }
        out.push('\n');
    }
    out
}

/// Parses the text matrix format produced by [`matrix_to_text`].
pub fn matrix_from_text(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix text".into()))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .ok_or_else(|| Error::Parse("missing row count".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad row count: {e}")))?;
    let cols: usize = parts
        .next()
        .ok_or_else(|| Error::Parse("missing column count".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad column count: {e}")))?;
    if parts.next().is_some() {
        return Err(Error::Parse("trailing tokens in matrix header".into()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (idx, line) in lines.enumerate() {
        if idx >= rows {
            return Err(Error::Parse(format!("more than {rows} data rows")));
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::Parse(format!("bad value {tok:?} on row {idx}: {e}")))?;
            data.push(v);
        }
        if data.len() != (idx + 1) * cols {
            return Err(Error::Parse(format!(
                "row {idx} has {} values, expected {cols}",
                data.len() - idx * cols
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} values, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok((rows, cols, data))
}

/// Writes bytes to `path` via a temp file in the same directory plus a
/// rename, so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    use std::io::Write as _;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Hex-encoded SHA-256 digest, used to fingerprint generated artifacts.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Formats an f64 for CSV output with the shortest representation that
/// round-trips, which is what Rust's default Display gives.
pub fn csv_f64(v: f64) -> String {
    format!("{v}")
}
