use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, LabResult};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> LabError + '_ {
    move |source| LabError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Shortest round-trip decimal, never in exponent form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Collects the files written for one run.
#[derive(Debug)]
pub struct Sink {
    dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
}

impl Sink {
    pub fn create(dir: &Path) -> LabResult<Self> {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> LabResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io_error(&path))?;
        self.artifacts.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn toml<T: Serialize>(&mut self, name: &str, value: &T) -> LabResult<()> {
        let text = toml::to_string(value)
            .map_err(|e| LabError::Config(format!("cannot serialize resolved config: {e}")))?;
        self.write(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> LabResult<()> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let path = self.dir.join(name);
        let csv_error = |e: csv::Error| LabError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        };
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
        self.write(name, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_plain_decimals() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1e-12), "0.000000000001");
        assert_eq!(num(1386.2943611198905), "1386.2943611198905");
        assert_eq!(num(-2.0), "-2");
    }
}
