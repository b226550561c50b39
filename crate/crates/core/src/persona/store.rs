//! Append-only JSON-lines persistence, one file per persona.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::session::{PersonaRecord, Turn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Persona(PersonaRecord),
    /// Turns appended together by one chat exchange.
    Turns { turns: Vec<Turn> },
}

/// Directory of `<persona id>.jsonl` files, or nothing at all.
#[derive(Debug, Clone)]
pub struct Store {
    root: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store { root: None }
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Store { root: Some(root) })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn path(&self, id: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(format!("{id}.jsonl")))
    }

    /// Writes the record as one line and syncs it before returning.
    pub fn append(&self, id: &str, record: &Record) -> Result<()> {
        let Some(path) = self.path(id) else {
            return Ok(());
        };
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Ids of every stored persona, sorted.
    pub fn ids(&self) -> Result<Vec<String>> {
        let Some(root) = &self.root else {
            return Ok(Vec::new());
        };
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(root)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem() {
                    ids.push(stem.to_string_lossy().into_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Reads all records for `id`. A torn final line is dropped with a
    /// warning; a bad line anywhere else is an error.
    pub fn load(&self, id: &str) -> Result<Vec<Record>> {
        let Some(path) = self.path(id) else {
            return Err(Error::NotFound(id.to_string()));
        };
        let file = File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(id.to_string()),
            _ => e.into(),
        })?;
        let lines: Vec<String> = BufReader::new(file).lines().collect::<std::io::Result<_>>()?;
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => out.push(r),
                Err(e) if i + 1 == lines.len() => {
                    log::warn!("{}: ignoring incomplete final record: {e}", path.display());
                }
                Err(e) => return Err(Error::invalid(format!("{}:{}: {e}", path.display(), i + 1))),
            }
        }
        Ok(out)
    }
}
