//! Output files: CSV with a metadata line, pretty JSON and SVG.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes the declared outputs of one run into a directory.
pub struct Output {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, config_json: &str) -> Self {
        let hash = Sha256::digest(config_json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            dir: dir.to_path_buf(),
            hash,
            written: Vec::new(),
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let p = self.dir.join(name);
        self.written.push(p.clone());
        Ok(p)
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let p = self.path(name)?;
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    /// Header row, then one row per record. The first line is a comment with
    /// the version and the config hash.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R], header: &[&str]) -> Result<(), CliError> {
        let mut buf = format!("# spintau {VERSION} config_sha256={}\n", self.hash).into_bytes();
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
            let csv_err = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(header).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        self.write(name, buf)
    }

    pub fn json<V: Serialize>(&mut self, name: &str, value: &V) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.into_bytes())
    }

    pub fn text(&mut self, name: &str, text: String) -> Result<(), CliError> {
        self.write(name, text.into_bytes())
    }
}

/// Six significant digits for terminal summaries.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(3.5449077018110318), "3.54491");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-0.000123456789), "-0.000123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
    }
}
