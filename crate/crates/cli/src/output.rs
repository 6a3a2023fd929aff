//! CSV and JSON files under an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Floats with 17 significant digits, which round-trip every `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table built in memory and written in one go.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width differs from the header");
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

/// Writes files relative to a root directory, remembering what it wrote.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    pub fn csv(&mut self, rel: &str, table: &Csv) -> Result<()> {
        self.write(rel, &table.text)
    }

    pub fn json(&mut self, rel: &str, value: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        self.write(rel, &(text + "\n"))
    }
}
