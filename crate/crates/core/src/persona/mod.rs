//! Persona creation and chat, grounded in a knowledge base and checked by
//! the detector.

pub mod abilities;
pub mod config;
pub mod engine;
pub mod kb;
pub mod prompt;
pub mod session;
pub mod store;

pub use abilities::{AbilityCatalog, AbilitySelection, CatalogFile};
pub use config::{PersonaConfig, DEFAULT_CONDITION, DEFAULT_OCCUPATIONS};
pub use engine::{
    answer_request, chat_request, narrative_request, validate_attrs, ChatOutcome, PersonaAttrs, PersonaEngine,
};
pub use kb::{KnowledgeBase, ManifestEntry, Passage};
pub use prompt::Role;
pub use session::{ChatSession, PersonaProfile, PersonaRecord, Turn};
pub use store::{Record, Store};
