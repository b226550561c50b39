//! Theme-indexed catalog of ability drivers, barriers and supports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::label::Theme;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbilitySelection {
    #[serde(default)]
    pub drivers: Vec<String>,
    #[serde(default)]
    pub barriers: Vec<String>,
    #[serde(default)]
    pub supports: Vec<String>,
}

impl AbilitySelection {
    pub fn is_empty(&self) -> bool {
        self.drivers.is_empty() && self.barriers.is_empty() && self.supports.is_empty()
    }

    fn groups(&self) -> [(&'static str, &[String]); 3] {
        [("drivers", &self.drivers), ("barriers", &self.barriers), ("supports", &self.supports)]
    }
}

/// `theme -> {drivers, barriers, supports}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbilityCatalog(pub BTreeMap<Theme, AbilitySelection>);

impl AbilityCatalog {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn for_theme(&self, theme: Theme) -> Option<&AbilitySelection> {
        self.0.get(&theme)
    }

    /// One field error per selected entry missing from the theme's catalog.
    pub fn check(&self, theme: Theme, selection: &AbilitySelection) -> Vec<FieldError> {
        let empty = AbilitySelection::default();
        let known = self.for_theme(theme).unwrap_or(&empty);
        let mut errors = Vec::new();
        for ((group, chosen), (_, allowed)) in selection.groups().into_iter().zip(known.groups()) {
            for (i, entry) in chosen.iter().enumerate() {
                if !allowed.contains(entry) {
                    errors.push(FieldError::new(
                        format!("abilities.{group}[{i}]"),
                        format!("\"{entry}\" is not in the {} catalog", theme.as_str()),
                    ));
                }
            }
        }
        errors
    }
}

/// Catalog file re-read whenever its modification time changes.
#[derive(Debug, Clone)]
pub struct CatalogFile {
    path: PathBuf,
    cached: Arc<Mutex<(Option<SystemTime>, Arc<AbilityCatalog>)>>,
}

impl CatalogFile {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mtime = std::fs::metadata(&path)?.modified().ok();
        let catalog = AbilityCatalog::load(&path)?;
        Ok(CatalogFile {
            path,
            cached: Arc::new(Mutex::new((mtime, Arc::new(catalog)))),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Current catalog; a file that fails to parse keeps the previous one.
    pub fn current(&self) -> Arc<AbilityCatalog> {
        let mut guard = self.cached.lock().expect("catalog lock");
        let mtime = std::fs::metadata(&self.path).and_then(|m| m.modified()).ok();
        if mtime != guard.0 {
            match AbilityCatalog::load(&self.path) {
                Ok(c) => {
                    log::info!("reloaded ability catalog from {}", self.path.display());
                    *guard = (mtime, Arc::new(c));
                }
                Err(e) => log::warn!("keeping previous ability catalog: {e}"),
            }
        }
        guard.1.clone()
    }

    pub fn theme(&self, theme: Theme) -> Result<AbilitySelection> {
        self.current()
            .for_theme(theme)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("no abilities for theme {}", theme.as_str())))
    }
}
