use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Metadata written next to every output file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub command: String,
    pub source: String,
    /// Fully resolved parameters, defaults included.
    pub params: Value,
    pub seeds: Vec<u64>,
    pub tolerances: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bounds: Option<Value>,
}

impl RunMeta {
    pub fn new(command: &str, source: &str, params: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.to_string(),
            source: source.to_string(),
            params,
            seeds: Vec::new(),
            tolerances: Value::Null,
            error_bounds: None,
        }
    }
}

/// Round-trip formatting (17 significant digits); negative zero is written as zero.
pub fn fmt(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn temp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".tmp{}", std::process::id()));
    PathBuf::from(s)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()
}

/// Writes the CSV and its sidecar to temporary files, then renames both into place.
pub fn write_outputs(out: &Path, table: &Table, meta: &RunMeta) -> Result<(), CliError> {
    let meta_out = meta_path(out);
    let tmp_csv = temp_path(out);
    let tmp_meta = temp_path(&meta_out);
    let result = (|| -> std::io::Result<()> {
        write_file(&tmp_csv, |w| {
            writeln!(w, "{}", table.header.join(","))?;
            for row in &table.rows {
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
        write_file(&tmp_meta, |w| {
            serde_json::to_writer_pretty(&mut *w, meta)?;
            writeln!(w)
        })?;
        std::fs::rename(&tmp_csv, out)?;
        std::fs::rename(&tmp_meta, &meta_out)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp_csv);
        let _ = std::fs::remove_file(&tmp_meta);
        return Err(CliError::Compute(format!("writing {}: {e}", out.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for v in [0.1, -1.0 / 3.0, 6.02e23, 5e-324, 0.0] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn failed_write_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("missing").join("x.csv");
        let t = Table::new(vec!["a"]);
        assert!(write_outputs(&out, &t, &RunMeta::new("c", "s", Value::Null)).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![fmt(1.0), fmt(2.0)]);
        write_outputs(&out, &t, &RunMeta::new("c", "s", Value::Null)).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("a,b\n"));
        assert!(meta_path(&out).exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
