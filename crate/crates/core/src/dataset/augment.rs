//! Seed expansion through a generation backend.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::{GenerationClient, GenerationRequest, Task};
use crate::label::{LabeledExample, Provenance, StereotypeLabel, Theme};

pub const DEFAULT_PROMPT_TEMPLATE: &str = "Write one new sentence about a person with Down syndrome in the \
context of {theme}. It must carry the same label ({label}) as the example below, use natural and varied \
wording, and avoid repeating the example or generic phrasing.\n\nExample: \"{seed}\"";

/// Attempts per requested example before giving up.
pub const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationJob {
    pub seeds: Vec<LabeledExample>,
    pub target_count: usize,
    pub theme: Theme,
    pub prompt_template: String,
}

impl AugmentationJob {
    pub fn new(seeds: Vec<LabeledExample>, target_count: usize, theme: Theme) -> Self {
        AugmentationJob {
            seeds,
            target_count,
            theme,
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("augmentation needs at least one seed"));
        }
        if self.target_count == 0 {
            return Err(Error::invalid("target_count must be positive"));
        }
        Ok(())
    }

    fn render(&self, seed: &str, label: StereotypeLabel) -> String {
        self.prompt_template
            .replace("{theme}", self.theme.as_str())
            .replace("{label}", label.as_str())
            .replace("{seed}", seed)
    }
}

/// Retry budget ran out; carries what was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAugmentation {
    pub produced: Vec<LabeledExample>,
    pub reason: String,
}

impl std::fmt::Display for PartialAugmentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "augmentation stopped after {} examples: {}", self.produced.len(), self.reason)
    }
}

impl std::error::Error for PartialAugmentation {}

/// Generates exactly `target_count` new examples, cycling through the seeds
/// in order so label proportions follow the seed set. Outputs that repeat a
/// seed or an earlier output are regenerated.
pub fn augment(
    job: &AugmentationJob,
    gen: &dyn GenerationClient,
) -> std::result::Result<Vec<LabeledExample>, AugmentError> {
    job.validate().map_err(AugmentError::Invalid)?;
    let n_seeds = job.seeds.len();
    let stride = job.target_count.div_ceil(n_seeds) as u64;
    let mut seen: HashSet<String> = job.seeds.iter().map(|s| normalize(&s.text)).collect();
    let mut produced = Vec::with_capacity(job.target_count);

    for slot in 0..job.target_count {
        let seed = &job.seeds[slot % n_seeds];
        let base = (slot / n_seeds) as u64;
        let mut accepted = None;
        let mut last_reason = String::from("duplicate output");
        for attempt in 0..MAX_ATTEMPTS {
            let request = GenerationRequest {
                task: Task::Augment {
                    seed: seed.text.clone(),
                    label: seed.label,
                    theme: job.theme,
                    variant: base + attempt * stride,
                },
                system: "You write short, realistic example sentences for a text classification dataset."
                    .to_string(),
                prompt: job.render(&seed.text, seed.label),
            };
            match gen.generate(&request) {
                Ok(text) => {
                    let text = text.trim().to_string();
                    if !text.is_empty() && seen.insert(normalize(&text)) {
                        accepted = Some(text);
                        break;
                    }
                    last_reason = "duplicate output".into();
                }
                Err(e) => last_reason = e.to_string(),
            }
        }
        match accepted {
            Some(text) => produced.push(LabeledExample {
                text,
                label: seed.label,
                theme: Some(job.theme),
                provenance: Provenance::Generated,
            }),
            None => {
                return Err(AugmentError::Partial(PartialAugmentation {
                    produced,
                    reason: format!("slot {slot}: {last_reason}"),
                }))
            }
        }
    }
    Ok(produced)
}

fn normalize(text: &str) -> String {
    text.trim().to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Invalid(Error),
    #[error(transparent)]
    Partial(PartialAugmentation),
}

impl From<AugmentError> for Error {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Invalid(e) => e,
            AugmentError::Partial(p) => Error::invalid(p.to_string()),
        }
    }
}
