//! CSV artifacts and digests.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

/// C-style `%.12e`: 1.5 → `1.500000000000e+00`.
pub fn sci(v: f64) -> String {
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[derive(Debug)]
pub struct NonFinite {
    pub column: String,
    pub row: usize,
}

/// Render rows under `header`; refuses NaN and infinities.
pub fn render_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String, NonFinite> {
    let mut out = String::with_capacity(rows.len() * header.len() * 20);
    out.push_str(&header.join(","));
    out.push('\n');
    for (r, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(NonFinite { column: header[i].to_string(), row: r });
            }
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", sci(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a CSV written by `render_csv`, checking the header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let got = lines.next().unwrap_or("");
    if got != header.join(",") {
        return Err(format!("{}: expected header {:?}, found {got:?}", path.display(), header.join(",")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match row {
                Ok(r) if r.len() == header.len() => Ok(r),
                _ => Err(format!("{}: malformed row {}", path.display(), i + 2)),
            }
        })
        .collect()
}
