//! Serialization of result tables to CSV or JSON, to a file or standard output.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

pub fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row)?;
            }
            Ok(w.into_inner().context("flushing CSV")?)
        }
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(rows)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

/// Writes `bytes` to `<out>/<stem>.<ext>` or to standard output; returns the file path if any.
pub fn emit(cfg: &RunConfig, stem: &str, bytes: &[u8]) -> Result<Option<PathBuf>> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(format!("{stem}.{}", cfg.format.extension()));
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            Ok(Some(path))
        }
        None => {
            std::io::stdout().lock().write_all(bytes)?;
            Ok(None)
        }
    }
}
