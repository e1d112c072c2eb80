//! Deterministic artifact writers: CSV with fixed-precision scientific
//! notation, JSON with recursively sorted keys. Identical inputs produce
//! byte-identical files regardless of thread count or platform.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(CliError::usage(format!(
                "unknown output format {other:?}; expected csv, json, or both"
            ))),
        }
    }

    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Fixed-precision scientific notation for CSV payload values.
pub fn num(value: f64) -> String {
    format!("{value:.12e}")
}

/// Serializes with keys sorted at every nesting level. serde_json's default
/// map is ordered, so a round trip through Value normalizes field order.
pub fn sorted_json<T: Serialize>(value: &T) -> CliResult<String> {
    let tree: serde_json::Value = serde_json::to_value(value)
        .map_err(|e| CliError::usage(format!("failed to serialize report: {e}")))?;
    let mut text = serde_json::to_string_pretty(&tree)
        .map_err(|e| CliError::usage(format!("failed to serialize report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Row-oriented CSV builder; callers provide every cell as text.
pub struct Csv {
    buffer: String,
}

impl Csv {
    pub fn new() -> Self {
        Csv {
            buffer: String::new(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for cell in cells {
            if !first {
                self.buffer.push(',');
            }
            self.buffer.push_str(cell.as_ref());
            first = false;
        }
        self.buffer.push('\n');
    }

    pub fn finish(self) -> String {
        self.buffer
    }
}

pub fn write_artifact(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::usage(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    let path = dir.join(name);
    fs::write(&path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
