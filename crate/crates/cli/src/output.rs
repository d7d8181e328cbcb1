//! Writers for experiment artifacts. Every file starts with a `# config`
//! line holding the resolved configuration as JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Serializes `rows` as CSV below the config echo line.
pub fn write_rows<T: Serialize>(path: &Path, cfg: &ExperimentConfig, rows: &[T]) -> Result<PathBuf> {
    let mut w = create(path)?;
    writeln!(w, "# config {}", cfg.echo())?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(path.to_path_buf())
}

/// Writes a table given as header and string cells.
pub fn write_table(path: &Path, cfg: &ExperimentConfig, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
    let mut w = create(path)?;
    writeln!(w, "# config {}", cfg.echo())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(path.to_path_buf())
}

/// Pretty JSON document with the resolved config under `config`.
pub fn write_json<T: Serialize>(path: &Path, cfg: &ExperimentConfig, body: &T) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        config: &'a ExperimentConfig,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &Doc { config: cfg, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Reads a CSV written by [`write_rows`], skipping the config line.
pub fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    Ok(rdr.records().collect::<std::result::Result<_, _>>()?)
}
