use serde::{Deserialize, Serialize};

use super::abilities::AbilitySelection;
use super::prompt::Role;
use crate::ensemble::FlaggedSentence;
use crate::generation::PersonaBrief;
use crate::label::Theme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub id: String,
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub condition: String,
    pub theme: Theme,
    pub abilities: AbilitySelection,
}

impl PersonaProfile {
    pub fn brief(&self) -> PersonaBrief {
        PersonaBrief {
            age: self.age,
            gender: self.gender.clone(),
            occupation: self.occupation.clone(),
            condition: self.condition.clone(),
            theme: self.theme,
        }
    }
}

/// Stored result of persona creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaRecord {
    pub profile: PersonaProfile,
    pub narrative: String,
    pub flags: Vec<FlaggedSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    /// Empty for user turns.
    #[serde(default)]
    pub flags: Vec<FlaggedSentence>,
    /// Milliseconds since the Unix epoch, strictly increasing within a
    /// session.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub persona_id: String,
    pub turns: Vec<Turn>,
}

impl ChatSession {
    pub fn new(persona_id: impl Into<String>) -> Self {
        ChatSession {
            persona_id: persona_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.turns.last().map(|t| t.timestamp)
    }

    /// Next timestamp at or after `now` that keeps the order strict.
    pub fn next_timestamp(&self, now: u64) -> u64 {
        match self.last_timestamp() {
            Some(last) if now <= last => last + 1,
            _ => now,
        }
    }
}
