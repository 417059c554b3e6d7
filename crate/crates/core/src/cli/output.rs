use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// `# key: value` lines written ahead of every CSV table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("# {k}: {}\n", v.replace('\n', " ")))
            .collect()
    }
}

/// Fixed-width scientific notation used in every table.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.6e}")
}

/// Convergence rate, or `NA` when it is undefined.
pub fn fmt_rate(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{v:.4}"),
        None => "NA".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes the metadata block followed by the table and returns `path`.
    pub fn write(&self, path: &Path, meta: &Metadata) -> Result<PathBuf> {
        let mut file = File::create(path)?;
        file.write_all(meta.render().as_bytes())?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(path.to_path_buf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_precedes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut meta = Metadata::new();
        meta.push("alpha0", "8");
        let mut t = CsvTable::new(vec!["a".into(), "b".into()]);
        t.push(vec![fmt_float(0.5), fmt_rate(None)]);
        let path = t.write(&dir.path().join("t.csv"), &meta).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "# alpha0: 8\na,b\n5.000000e-1,NA\n");
        assert_eq!(meta.get("alpha0"), Some("8"));
    }
}
