//! Artifact writing: CSV tables and JSON summaries, each with a `.meta.json`
//! sidecar. Files are written to a temporary name and renamed into place, so a
//! failed stage leaves no partial artifact behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SOFTWARE: &str = "krylovflow";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct Meta {
    pub software: String,
    pub version: String,
    pub command: String,
    pub file: String,
    pub config: Value,
}

pub struct Output {
    dir: PathBuf,
    config: Value,
}

impl Output {
    pub fn new(dir: impl Into<PathBuf>, config: Value) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, config })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.partial"));
        fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            CliError::io(&target, e)
        })
    }

    fn write_meta(&self, name: &str, command: &str) -> CliResult<()> {
        let meta = Meta {
            software: SOFTWARE.into(),
            version: VERSION.into(),
            command: command.into(),
            file: name.into(),
            config: self.config.clone(),
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        text.push('\n');
        self.write_atomic(&format!("{name}.meta.json"), text.as_bytes())
    }

    /// Writes a table; every row must have `header.len()` cells.
    pub fn write_csv(&self, name: &str, command: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Csv {
            path: self.path(name),
            message: e.to_string(),
        };
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Csv {
            path: self.path(name),
            message: e.to_string(),
        })?;
        self.write_atomic(name, &bytes)?;
        self.write_meta(name, command)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, command: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.write_atomic(name, text.as_bytes())?;
        self.write_meta(name, command)
    }

    pub fn read_meta(&self, name: &str) -> Option<Meta> {
        let text = fs::read_to_string(self.path(&format!("{name}.meta.json"))).ok()?;
        serde_json::from_str(&text).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_and_sidecar_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = Output::new(dir.path(), serde_json::json!({"k": 1})).unwrap();
        out.write_csv("x.csv", "test", &["a", "b"], &[vec!["1".into(), "2".into()]])
            .unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x.csv")).unwrap(), "a,b\n1,2\n");
        let meta = out.read_meta("x.csv").unwrap();
        assert_eq!(meta.command, "test");
        assert_eq!(meta.config["k"], 1);
        assert!(!dir.path().join(".x.csv.partial").exists());
    }
}
