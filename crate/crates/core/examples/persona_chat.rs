//! Creates a persona and holds a short chat, printing flagged sentences.
//!
//!     cargo run --release --example persona_chat

use std::sync::Arc;

use personaflag::classifier::synthetic::reference_models;
use personaflag::ensemble::Detector;
use personaflag::generation::StubClient;
use personaflag::persona::{
    AbilityCatalog, AbilitySelection, KnowledgeBase, PersonaAttrs, PersonaConfig, PersonaEngine, Store,
};

fn main() -> personaflag::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let kb = Arc::new(KnowledgeBase::load_dir(format!("{data}/kb"))?);
    let catalog = AbilityCatalog::load(format!("{data}/abilities.json"))?;
    let gen = Arc::new(StubClient::new(5));
    let detector = Detector::from_models(reference_models(1 << 14, 42)?, gen.clone())?;
    let engine = PersonaEngine::new(PersonaConfig::default(), kb, gen, Some(detector), Store::in_memory())?;

    let attrs = PersonaAttrs {
        age: Some(24),
        gender: Some("male".into()),
        occupation: Some("Shop Assistant".into()),
        condition: None,
        theme: Some("employment".into()),
        abilities: AbilitySelection {
            drivers: vec!["friendly with customers".into()],
            barriers: vec!["long commute".into()],
            supports: vec!["travel training".into()],
        },
    };
    let record = engine.create_persona(&attrs, &catalog)?;
    println!("{}: {}\n", record.profile.id, record.narrative);

    for message in ["What do you like about your job?", "How do you get to work?"] {
        let out = engine.chat_turn(&record.profile.id, message)?;
        println!("> {message}\n{}", out.reply);
        for f in out.flags.iter().filter(|f| !f.decision.is_neutral()) {
            println!("  flagged {:?}: {}", f.decision.labels, f.sentence.text);
            if let Some(e) = &f.explanation {
                println!("    {e}");
            }
        }
        println!();
    }
    Ok(())
}
