//! CSV artifacts: a `#` comment block carrying the resolved config, then a
//! header row and data rows. Files appear atomically or not at all.

use std::io::Write;
use std::path::{Path, PathBuf};

use stirap::{StirapError, StirapResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StirapError + '_ {
    move |source| StirapError::Io { path: path.display().to_string(), source }
}

/// Fixed-width float text so files are byte-stable.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.10e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra comment lines after the config block.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }
}

/// Writes `table` to `dir/name` via a temporary file in the same directory.
pub fn write_csv(dir: &Path, name: &str, header: &str, table: &Table) -> StirapResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    {
        let f = tmp.as_file_mut();
        f.write_all(header.as_bytes()).map_err(io_err(&path))?;
        for n in &table.notes {
            writeln!(f, "# {n}").map_err(io_err(&path))?;
        }
    }
    let mut w = csv::Writer::from_writer(tmp.as_file_mut());
    let csv_err = |e: csv::Error| StirapError::Io { path: path.display().to_string(), source: e.into() };
    w.write_record(&table.columns).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    drop(w);
    tmp.persist(&path).map_err(|e| StirapError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(path)
}

/// Writes a text file atomically.
pub fn write_text(dir: &Path, name: &str, text: &str) -> StirapResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(text.as_bytes()).map_err(io_err(&path))?;
    tmp.persist(&path).map_err(|e| StirapError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(path)
}
