use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::abilities::{AbilityCatalog, AbilitySelection};
use super::config::{PersonaConfig, DEFAULT_CONDITION};
use super::kb::{KnowledgeBase, Passage};
use super::prompt::{self, Role};
use super::session::{ChatSession, PersonaProfile, PersonaRecord, Turn};
use super::store::{Record, Store};
use crate::ensemble::{Detector, FlaggedSentence};
use crate::error::{Error, FieldError, Result};
use crate::generation::{GenerationClient, GenerationRequest, PersonaBrief, Task};
use crate::label::Theme;

/// Unvalidated persona attributes as received from a caller.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaAttrs {
    pub age: Option<i64>,
    pub gender: Option<String>,
    pub occupation: Option<String>,
    pub condition: Option<String>,
    pub theme: Option<String>,
    pub abilities: AbilitySelection,
}

/// Checks `attrs` against the configuration and catalog, reporting every
/// offending field at once.
pub fn validate_attrs(
    attrs: &PersonaAttrs,
    config: &PersonaConfig,
    catalog: &AbilityCatalog,
) -> std::result::Result<PersonaProfile, Vec<FieldError>> {
    let mut errors = Vec::new();
    let age = match attrs.age {
        None => {
            errors.push(FieldError::new("age", "required"));
            None
        }
        Some(a) if a < config.min_age as i64 || a > config.max_age as i64 => {
            errors.push(FieldError::new(
                "age",
                format!("must be between {} and {}", config.min_age, config.max_age),
            ));
            None
        }
        Some(a) => Some(a as u32),
    };
    let gender = attrs.gender.as_deref().map(str::trim).unwrap_or_default();
    if gender.is_empty() {
        errors.push(FieldError::new("gender", "required"));
    }
    let occupation = attrs.occupation.as_deref().unwrap_or_default();
    if occupation.is_empty() {
        errors.push(FieldError::new("occupation", "required"));
    } else if !config.has_occupation(occupation) {
        errors.push(FieldError::new(
            "occupation",
            format!("must be one of: {}", config.occupations.join(", ")),
        ));
    }
    let theme = match attrs.theme.as_deref() {
        None => {
            errors.push(FieldError::new("theme", "required"));
            None
        }
        Some(t) => match t.parse::<Theme>() {
            Ok(t) => Some(t),
            Err(_) => {
                errors.push(FieldError::new("theme", "must be one of: family, education, employment"));
                None
            }
        },
    };
    if let Some(theme) = theme {
        errors.extend(catalog.check(theme, &attrs.abilities));
    }
    let condition = attrs
        .condition
        .as_deref()
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .unwrap_or(DEFAULT_CONDITION);
    match (age, theme) {
        (Some(age), Some(theme)) if errors.is_empty() => Ok(PersonaProfile {
            id: String::new(),
            age,
            gender: gender.to_string(),
            occupation: occupation.to_string(),
            condition: condition.to_string(),
            theme,
            abilities: attrs.abilities.clone(),
        }),
        _ => Err(errors),
    }
}

pub fn narrative_request(profile: &PersonaProfile, passages: &[&Passage]) -> GenerationRequest {
    let metadata = prompt::render_metadata(&profile.brief(), &profile.abilities);
    GenerationRequest {
        task: Task::Narrative {
            persona: profile.brief(),
            passages: passages.iter().map(|p| p.text.clone()).collect(),
        },
        system: prompt::SYSTEM_PERSONA.to_string(),
        prompt: prompt::assemble(
            &metadata,
            &[],
            passages,
            "Introduce yourself in a short first-person narrative about your daily life.",
        ),
    }
}

pub fn chat_request(
    profile: &PersonaProfile,
    history: &[String],
    passages: &[&Passage],
    message: &str,
) -> GenerationRequest {
    let metadata = prompt::render_metadata(&profile.brief(), &profile.abilities);
    GenerationRequest {
        task: Task::ChatReply {
            persona: profile.brief(),
            message: message.to_string(),
            passages: passages.iter().map(|p| p.text.clone()).collect(),
        },
        system: prompt::SYSTEM_PERSONA.to_string(),
        prompt: prompt::assemble(&metadata, history, passages, message),
    }
}

/// Single-question answer. The ungrounded form passes no passages and asks
/// for a single paragraph.
pub fn answer_request(
    brief: &PersonaBrief,
    question: &str,
    passages: &[&Passage],
    limit_length: bool,
) -> GenerationRequest {
    let metadata = prompt::render_metadata(brief, &AbilitySelection::default());
    let message = if limit_length {
        format!("{question}\n{}", prompt::LENGTH_LIMIT)
    } else {
        question.to_string()
    };
    GenerationRequest {
        task: Task::Answer {
            persona: brief.clone(),
            question: question.to_string(),
            passages: passages.iter().map(|p| p.text.clone()).collect(),
        },
        system: prompt::SYSTEM_PERSONA.to_string(),
        prompt: prompt::assemble(&metadata, &[], passages, &message),
    }
}

/// Retrieval query for a new persona.
pub fn profile_query(profile: &PersonaProfile) -> String {
    let a = &profile.abilities;
    [
        vec![profile.occupation.clone(), profile.theme.as_str().to_string()],
        a.drivers.clone(),
        a.barriers.clone(),
        a.supports.clone(),
    ]
    .concat()
    .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatOutcome {
    pub reply: String,
    pub flags: Vec<FlaggedSentence>,
}

struct SessionState {
    record: PersonaRecord,
    session: ChatSession,
}

/// Creates personas and runs chat turns over a knowledge base, passing all
/// generated text through the detector when one is configured.
pub struct PersonaEngine {
    config: PersonaConfig,
    kb: Arc<KnowledgeBase>,
    gen: Arc<dyn GenerationClient>,
    detector: Option<Detector>,
    store: Store,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionState>>>>,
    next_id: Mutex<u64>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl PersonaEngine {
    /// Opens the engine and loads every persona already in `store`.
    pub fn new(
        config: PersonaConfig,
        kb: Arc<KnowledgeBase>,
        gen: Arc<dyn GenerationClient>,
        detector: Option<Detector>,
        store: Store,
    ) -> Result<Self> {
        config.validate()?;
        let mut sessions = HashMap::new();
        let mut max_seq = 0;
        for id in store.ids()? {
            let mut record = None;
            let mut session = ChatSession::new(&id);
            for r in store.load(&id)? {
                match r {
                    Record::Persona(p) => record = Some(p),
                    Record::Turns { turns } => session.turns.extend(turns),
                }
            }
            let Some(record) = record else {
                log::warn!("persona file {id} has no profile record; skipped");
                continue;
            };
            if let Some(n) = id.strip_prefix("persona-").and_then(|n| n.parse::<u64>().ok()) {
                max_seq = max_seq.max(n);
            }
            sessions.insert(id, Arc::new(Mutex::new(SessionState { record, session })));
        }
        Ok(PersonaEngine {
            config,
            kb,
            gen,
            detector,
            store,
            sessions: Mutex::new(sessions),
            next_id: Mutex::new(max_seq + 1),
        })
    }

    pub fn config(&self) -> &PersonaConfig {
        &self.config
    }

    pub fn knowledge_base(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn detection_enabled(&self) -> bool {
        self.detector.is_some()
    }

    fn detect(&self, text: &str) -> Vec<FlaggedSentence> {
        self.detector.as_ref().map(|d| d.detect(text)).unwrap_or_default()
    }

    pub fn create_persona(&self, attrs: &PersonaAttrs, catalog: &AbilityCatalog) -> Result<PersonaRecord> {
        let mut profile = validate_attrs(attrs, &self.config, catalog).map_err(Error::Validation)?;
        let passages: Vec<&Passage> = self
            .kb
            .retrieve_theme(&profile_query(&profile), profile.theme, self.config.retrieval_k)
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        let narrative = self.gen.generate(&narrative_request(&profile, &passages))?;
        let flags = self.detect(&narrative);

        let mut next = self.next_id.lock().expect("id lock");
        profile.id = format!("persona-{}", *next);
        let record = PersonaRecord {
            profile,
            narrative,
            flags,
        };
        self.store.append(&record.profile.id, &Record::Persona(record.clone()))?;
        *next += 1;
        let id = record.profile.id.clone();
        let state = SessionState {
            record: record.clone(),
            session: ChatSession::new(&id),
        };
        self.sessions
            .lock()
            .expect("session map")
            .insert(id, Arc::new(Mutex::new(state)));
        Ok(record)
    }

    fn state(&self, persona_id: &str) -> Result<Arc<Mutex<SessionState>>> {
        self.sessions
            .lock()
            .expect("session map")
            .get(persona_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("persona {persona_id}")))
    }

    pub fn get(&self, persona_id: &str) -> Result<(PersonaRecord, ChatSession)> {
        let state = self.state(persona_id)?;
        let s = state.lock().expect("session lock");
        Ok((s.record.clone(), s.session.clone()))
    }

    pub fn persona_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("session map").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// History lines that fit the configured budget, oldest first.
    pub fn trimmed_history(&self, session: &ChatSession) -> Vec<String> {
        let first = prompt::trim_history(
            session.turns.iter().map(|t| (t.role, t.text.as_str())),
            self.config.history_budget,
        );
        session.turns[first..]
            .iter()
            .map(|t| prompt::history_line(t.role, &t.text))
            .collect()
    }

    /// Runs one exchange. Turns on the same persona are serialized; the
    /// session is only changed once the reply has been generated, detected
    /// and persisted.
    pub fn chat_turn(&self, persona_id: &str, message: &str) -> Result<ChatOutcome> {
        let message = message.trim();
        if message.is_empty() {
            return Err(Error::Validation(vec![FieldError::new("message", "must not be empty")]));
        }
        let state = self.state(persona_id)?;
        let mut s = state.lock().expect("session lock");
        let profile = &s.record.profile;
        let passages: Vec<&Passage> = self
            .kb
            .retrieve_theme(message, profile.theme, self.config.retrieval_k)
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        let history = self.trimmed_history(&s.session);
        let request = chat_request(profile, &history, &passages, message);
        let reply = self.gen.generate(&request)?;
        let flags = self.detect(&reply);

        let user_ts = s.session.next_timestamp(now_ms());
        let reply_ts = now_ms().max(user_ts + 1);
        let turns = vec![
            Turn {
                role: Role::User,
                text: message.to_string(),
                flags: Vec::new(),
                timestamp: user_ts,
            },
            Turn {
                role: Role::Persona,
                text: reply.clone(),
                flags: flags.clone(),
                timestamp: reply_ts,
            },
        ];
        self.store.append(persona_id, &Record::Turns { turns: turns.clone() })?;
        s.session.turns.extend(turns);
        Ok(ChatOutcome { reply, flags })
    }
}
