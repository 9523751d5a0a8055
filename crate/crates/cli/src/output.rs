//! CSV and JSONL writers for run outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Transition log lines carry this version so downstream readers can detect changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Round-trip float formatting used in every CSV.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn file(&self, name: &str) -> Result<Sink> {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Sink {
            path,
            inner: BufWriter::new(file),
        })
    }

    pub fn csv(&self, name: &str, header: &[&str]) -> Result<Sink> {
        let mut sink = self.file(name)?;
        sink.line(&header.join(","))?;
        Ok(sink)
    }

    /// Prints the verdict and stores it next to the other outputs.
    pub fn verdict(&self, pass: bool, detail: &str) -> Result<bool> {
        let line = format!("{} {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        let mut sink = self.file("verdict.txt")?;
        sink.line(&line)?;
        sink.finish()?;
        Ok(pass)
    }
}

pub struct Sink {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl Sink {
    fn io(&self, source: std::io::Error) -> CliError {
        CliError::Io {
            path: self.path.clone(),
            source,
        }
    }

    pub fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.inner, "{s}").map_err(|e| self.io(e))
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        self.line(&cells.join(","))
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.inner, value).map_err(|e| self.io(e.into()))?;
        writeln!(self.inner).map_err(|e| self.io(e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| self.io(e))
    }
}
