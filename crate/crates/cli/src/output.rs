// SPDX-License-Identifier: Apache-2.0

//! Output formatting and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Formats `x` with `digits` significant digits, in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Serializes rows as CSV with a header taken from the row type.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, String> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| e.to_string())?;
    v.push(b'\n');
    Ok(v)
}

/// Rows as CSV or as a JSON array.
pub fn table_bytes<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>, String> {
    match format {
        Format::Csv => csv_bytes(rows),
        Format::Json => json_bytes(rows),
    }
}

/// Files produced by a run, held in memory until every stage has
/// succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((rel.into(), bytes));
    }

    pub fn extend(&mut self, prefix: &Path, other: Artifacts) {
        for (p, b) in other.files {
            self.files.push((prefix.join(p), b));
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, rel: &Path) -> Option<&[u8]> {
        self.files.iter().find(|(p, _)| p == rel).map(|(_, b)| b.as_slice())
    }

    /// Writes every file under `out`, each through a temporary file in the
    /// destination directory renamed into place.
    pub fn commit(&self, out: &Path) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, bytes) in &self.files {
            let dest = out.join(rel);
            let dir = dest.parent().unwrap_or(out);
            std::fs::create_dir_all(dir)?;
            let mut tmp = tempfile::Builder::new().prefix(".stack3d-").tempfile_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&dest).map_err(|e| e.error)?;
            written.push(dest);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.0, 6), "0");
        assert_eq!(sig(31.3173, 6), "31.3173");
        assert_eq!(sig(31.317312, 6), "31.3173");
        assert_eq!(sig(100.0, 6), "100");
        assert_eq!(sig(0.000123456789, 6), "0.000123457");
        assert_eq!(sig(1.5e-5, 6), "1.5e-05");
        assert_eq!(sig(123456789.0, 6), "1.23457e+08");
        assert_eq!(sig(-2.5, 6), "-2.5");
        assert_eq!(sig(999999.5, 6), "1e+06");
    }

    #[test]
    fn commit_writes_nested_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.add("x.txt", b"one".to_vec());
        a.add("sub/y.txt", b"two".to_vec());
        a.commit(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("sub/y.txt")).unwrap(), b"two");
        let stray: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(".stack3d-"))
            .collect();
        assert!(stray.is_empty());
    }
}
