use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OCCUPATIONS: [&str; 12] = [
    "Artist",
    "Athlete",
    "Baker",
    "Business Owner",
    "Customer Service",
    "Cooker",
    "School Assistant",
    "Shop Assistant",
    "Office Assistant",
    "Social Activist",
    "Student",
    "Teacher",
];

pub const DEFAULT_CONDITION: &str = "Down Syndrome";
pub const DEFAULT_HISTORY_BUDGET: usize = 4_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaConfig {
    pub min_age: u32,
    pub max_age: u32,
    pub occupations: Vec<String>,
    /// Characters of conversation history included in a chat prompt.
    pub history_budget: usize,
    /// Passages retrieved per prompt.
    pub retrieval_k: usize,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        PersonaConfig {
            min_age: 10,
            max_age: 80,
            occupations: DEFAULT_OCCUPATIONS.iter().map(|s| s.to_string()).collect(),
            history_budget: DEFAULT_HISTORY_BUDGET,
            retrieval_k: 3,
        }
    }
}

impl PersonaConfig {
    /// Ages 10 to 40.
    pub fn capped_at_forty() -> Self {
        PersonaConfig {
            max_age: 40,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_age >= self.max_age {
            return Err(Error::invalid(format!(
                "age bounds must satisfy min < max, got [{}, {}]",
                self.min_age, self.max_age
            )));
        }
        if self.occupations.is_empty() {
            return Err(Error::invalid("occupation list is empty"));
        }
        if self.retrieval_k == 0 {
            return Err(Error::invalid("retrieval_k must be positive"));
        }
        Ok(())
    }

    pub fn has_occupation(&self, occupation: &str) -> bool {
        self.occupations.iter().any(|o| o == occupation)
    }
}
