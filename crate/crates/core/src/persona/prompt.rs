//! Prompt assembly. Sections always appear in the order persona metadata,
//! conversation history, background passages, user message.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::abilities::AbilitySelection;
use super::kb::Passage;
use crate::generation::PersonaBrief;

pub const PROMPT_VERSION: &str = "persona-prompt/1";

pub const SECTION_PERSONA: &str = "## Persona";
pub const SECTION_HISTORY: &str = "## Conversation so far";
pub const SECTION_PASSAGES: &str = "## Background passages";
pub const SECTION_MESSAGE: &str = "## User message";

pub const SYSTEM_PERSONA: &str = "You are role-playing a person described below. Stay in character, speak in the \
first person, and use the background passages as factual grounding.";

pub const LENGTH_LIMIT: &str = "Limit the response to a single paragraph.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Persona,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "User",
            Role::Persona => "Persona",
        }
    }
}

/// A line of history as it appears in the prompt.
pub fn history_line(role: Role, text: &str) -> String {
    format!("{}: {}", role.as_str(), text)
}

/// Keeps the most recent turns whose rendered lines fit in `budget`
/// characters (newlines included). Returns the index of the first kept turn.
pub fn trim_history<'a>(turns: impl DoubleEndedIterator<Item = (Role, &'a str)> + ExactSizeIterator, budget: usize) -> usize {
    let n = turns.len();
    let mut used = 0;
    let mut first = n;
    for (role, text) in turns.rev() {
        let cost = history_line(role, text).chars().count() + 1;
        if used + cost > budget {
            break;
        }
        used += cost;
        first -= 1;
    }
    first
}

pub fn render_metadata(persona: &PersonaBrief, abilities: &AbilitySelection) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Age: {}", persona.age);
    let _ = writeln!(s, "Gender: {}", persona.gender);
    let _ = writeln!(s, "Occupation: {}", persona.occupation);
    let _ = writeln!(s, "Condition: {}", persona.condition);
    let _ = writeln!(s, "Theme: {}", persona.theme);
    let list = |items: &[String]| if items.is_empty() { "none".to_string() } else { items.join(", ") };
    let _ = writeln!(s, "Ability drivers: {}", list(&abilities.drivers));
    let _ = writeln!(s, "Ability barriers: {}", list(&abilities.barriers));
    let _ = write!(s, "Supports: {}", list(&abilities.supports));
    s
}

/// Assembles a full prompt. `history` lines are included verbatim.
pub fn assemble(metadata: &str, history: &[String], passages: &[&Passage], message: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SECTION_PERSONA}\n{metadata}\n");
    let _ = writeln!(s, "{SECTION_HISTORY}");
    if history.is_empty() {
        let _ = writeln!(s, "(none)");
    }
    for line in history {
        let _ = writeln!(s, "{line}");
    }
    let _ = writeln!(s, "\n{SECTION_PASSAGES}");
    if passages.is_empty() {
        let _ = writeln!(s, "(none)");
    }
    for p in passages {
        let _ = writeln!(s, "[{}] {}", p.id, p.text);
    }
    let _ = write!(s, "\n{SECTION_MESSAGE}\n{message}");
    s
}

/// Passage ids cited in an assembled prompt, in order.
pub fn cited_passage_ids(prompt: &str) -> Vec<String> {
    let Some(start) = prompt.find(SECTION_PASSAGES) else {
        return Vec::new();
    };
    let end = prompt.find(SECTION_MESSAGE).unwrap_or(prompt.len());
    prompt[start..end]
        .lines()
        .filter_map(|l| l.strip_prefix('[')?.split_once(']').map(|(id, _)| id.to_string()))
        .collect()
}
