use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::GenerationSettings;
use crate::persona::PersonaConfig;

pub const ENV_CONFIG: &str = "PERSONAFLAG_CONFIG";
pub const ENV_LISTEN: &str = "PERSONAFLAG_LISTEN";
pub const ENV_DATA_DIR: &str = "PERSONAFLAG_DATA_DIR";
pub const ENV_DETECTION: &str = "PERSONAFLAG_DETECTION";

pub const DEFAULT_MAX_DETECT_CHARS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub persona: PersonaConfig,
    pub abilities_path: PathBuf,
    pub kb_path: PathBuf,
    /// The three ensemble members.
    pub model_paths: Vec<PathBuf>,
    pub generation: GenerationSettings,
    /// Run generated persona text through the detector.
    pub detection_enabled: bool,
    /// Where personas, sessions and experiment archives are written.
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub max_detect_chars: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            persona: PersonaConfig::default(),
            abilities_path: data.join("abilities.json"),
            kb_path: data.join("kb"),
            model_paths: Vec::new(),
            generation: GenerationSettings::default(),
            detection_enabled: true,
            data_dir: None,
            max_detect_chars: DEFAULT_MAX_DETECT_CHARS,
        }
    }
}

fn parse_bool(name: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "on" | "yes" => Ok(true),
        "0" | "false" | "off" | "no" => Ok(false),
        other => Err(Error::invalid(format!("{name}: expected a boolean, got {other:?}"))),
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    /// Reads `path`, applies environment overrides and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        // Relative paths are relative to the config file.
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut cfg.abilities_path);
            fix(&mut cfg.kb_path);
            cfg.model_paths.iter_mut().for_each(fix);
            if let Some(d) = cfg.data_dir.as_mut() {
                fix(d);
            }
        }
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(ENV_LISTEN) {
            self.listen = v;
        }
        if let Ok(v) = std::env::var(ENV_DATA_DIR) {
            self.data_dir = Some(v.into());
        }
        if let Ok(v) = std::env::var(ENV_DETECTION) {
            self.detection_enabled = parse_bool(ENV_DETECTION, &v)?;
        }
        self.generation = self.generation.clone().apply_env()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_paths.len() != 3 {
            return Err(Error::invalid(format!(
                "exactly three model paths are required, got {}",
                self.model_paths.len()
            )));
        }
        if self.max_detect_chars == 0 {
            return Err(Error::invalid("max_detect_chars must be positive"));
        }
        self.persona.validate()
    }
}
