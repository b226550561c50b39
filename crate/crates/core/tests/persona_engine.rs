mod common;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use personaflag::classifier::features::tokenize;
use personaflag::error::GenerationError;
use personaflag::generation::{GenerationClient, GenerationRequest, StubClient};
use personaflag::persona::prompt::{cited_passage_ids, trim_history};
use personaflag::persona::{
    AbilityCatalog, AbilitySelection, KnowledgeBase, PersonaAttrs, PersonaConfig, PersonaEngine, Role, Store,
};
use personaflag::Theme;

use common::*;

fn kb() -> Arc<KnowledgeBase> {
    Arc::new(KnowledgeBase::load_dir(data_dir().join("kb")).unwrap())
}

fn catalog() -> AbilityCatalog {
    AbilityCatalog::load(data_dir().join("abilities.json")).unwrap()
}

fn attrs() -> PersonaAttrs {
    PersonaAttrs {
        age: Some(24),
        gender: Some("female".into()),
        occupation: Some("Artist".into()),
        condition: None,
        theme: Some("employment".into()),
        abilities: AbilitySelection {
            drivers: vec!["attention to detail".into()],
            barriers: vec!["long commute".into()],
            supports: vec!["job coach".into()],
        },
    }
}

/// Stub that records prompts and can be told to fail.
struct Recording {
    inner: StubClient,
    fail: AtomicBool,
    prompts: std::sync::Mutex<Vec<String>>,
}

impl GenerationClient for Recording {
    fn name(&self) -> &str {
        "recording"
    }
    fn generate(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        self.prompts.lock().unwrap().push(request.prompt.clone());
        if self.fail.load(Ordering::SeqCst) {
            return Err(GenerationError::Timeout);
        }
        self.inner.generate(request)
    }
}

fn engine(gen: Arc<dyn GenerationClient>) -> PersonaEngine {
    PersonaEngine::new(PersonaConfig::default(), kb(), gen, Some(detector()), Store::in_memory()).unwrap()
}

#[test]
fn retrieval_matches_brute_force_cosine() {
    let kb = kb();
    let docs: Vec<Vec<String>> = kb.passages().iter().map(|p| tokenize(&p.text)).collect();
    let n = docs.len() as f64;
    let idf = |t: &str| {
        let df = docs.iter().filter(|d| d.iter().any(|x| x == t)).count() as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    };
    let vector = |tokens: &[String], vocab_only: bool| {
        let mut v: HashMap<String, f64> = HashMap::new();
        for t in tokens {
            if vocab_only && !docs.iter().any(|d| d.contains(t)) {
                continue;
            }
            *v.entry(t.clone()).or_default() += 1.0;
        }
        for (t, w) in v.iter_mut() {
            *w *= idf(t);
        }
        v
    };
    let cosine = |a: &HashMap<String, f64>, b: &HashMap<String, f64>| {
        let dot: f64 = a.iter().map(|(t, w)| w * b.get(t).copied().unwrap_or(0.0)).sum();
        let na = a.values().map(|w| w * w).sum::<f64>().sqrt();
        let nb = b.values().map(|w| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) }
    };
    for query in ["job coach at work", "school inclusion teacher", "family siblings home", "zebra"] {
        let q = vector(&tokenize(query), true);
        let expected: Vec<f64> = docs.iter().map(|d| cosine(&q, &vector(d, false))).collect();
        for (got, want) in kb.scores(query).iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "{query}");
        }
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.sort_by(|&a, &b| expected[b].total_cmp(&expected[a]));
        let ids: Vec<&str> = kb.retrieve(query, 3).iter().map(|(p, _)| p.id.as_str()).collect();
        let want: Vec<&str> = order[..3].iter().map(|&i| kb.passages()[i].id.as_str()).collect();
        assert_eq!(ids, want, "{query}");
    }
}

#[test]
fn prompts_cite_only_theme_passages() {
    let gen = Arc::new(Recording {
        inner: StubClient::new(1),
        fail: AtomicBool::new(false),
        prompts: Default::default(),
    });
    let e = engine(gen.clone());
    let rec = e.create_persona(&attrs(), &catalog()).unwrap();
    e.chat_turn(&rec.profile.id, "Tell me about school and family").unwrap();
    let kb = kb();
    for prompt in gen.prompts.lock().unwrap().iter().filter(|p| p.contains("## Background passages")) {
        let cited = cited_passage_ids(prompt);
        assert!(!cited.is_empty());
        for id in cited {
            assert_eq!(kb.get(&id).unwrap().theme, Theme::Employment, "{id}");
        }
    }
}

#[test]
fn history_stays_within_budget() {
    let e = engine(Arc::new(StubClient::new(2)));
    let rec = e.create_persona(&attrs(), &catalog()).unwrap();
    for i in 0..100 {
        e.chat_turn(&rec.profile.id, &format!("Question number {i} about work and my day?")).unwrap();
    }
    let (_, session) = e.get(&rec.profile.id).unwrap();
    assert_eq!(session.turns.len(), 200);
    let lines = e.trimmed_history(&session);
    let cost: usize = lines.iter().map(|l| l.chars().count() + 1).sum();
    assert!(cost <= 4000, "{cost}");
    assert!(lines.len() < 200);
    let last = session.turns.last().unwrap();
    assert!(lines.last().unwrap().contains(&last.text));
    let first = trim_history(session.turns.iter().map(|t| (t.role, t.text.as_str())), 4000);
    assert_eq!(lines.len(), 200 - first);
    for w in session.turns.windows(2) {
        assert!(w[0].timestamp < w[1].timestamp);
    }
    assert_eq!(session.turns[0].role, Role::User);
}

#[test]
fn failed_generation_leaves_session_unchanged() {
    let gen = Arc::new(Recording {
        inner: StubClient::new(3),
        fail: AtomicBool::new(false),
        prompts: Default::default(),
    });
    let e = engine(gen.clone());
    let rec = e.create_persona(&attrs(), &catalog()).unwrap();
    e.chat_turn(&rec.profile.id, "Hello there").unwrap();
    gen.fail.store(true, Ordering::SeqCst);
    assert!(e.chat_turn(&rec.profile.id, "Second message").is_err());
    assert_eq!(e.get(&rec.profile.id).unwrap().1.turns.len(), 2);
}

#[test]
fn reply_flags_tile_the_reply() {
    let e = engine(Arc::new(StubClient::new(4)));
    let rec = e.create_persona(&attrs(), &catalog()).unwrap();
    let out = e.chat_turn(&rec.profile.id, "What do you do at work?").unwrap();
    let chars: Vec<char> = out.reply.chars().collect();
    for f in &out.flags {
        let slice: String = chars[f.sentence.start..f.sentence.end].iter().collect();
        assert_eq!(slice, f.sentence.text);
    }
    let covered: usize = out.flags.iter().map(|f| f.sentence.end - f.sentence.start).sum();
    let non_space = out.reply.chars().filter(|c| !c.is_whitespace()).count();
    let flagged_non_space: usize = out
        .flags
        .iter()
        .map(|f| f.sentence.text.chars().filter(|c| !c.is_whitespace()).count())
        .sum();
    assert_eq!(non_space, flagged_non_space);
    assert!(covered <= chars.len());
}

#[test]
fn same_inputs_same_outputs() {
    let run = || {
        let e = engine(Arc::new(StubClient::new(5)));
        let rec = e.create_persona(&attrs(), &catalog()).unwrap();
        let out = e.chat_turn(&rec.profile.id, "How do you get to work?").unwrap();
        (rec.narrative, rec.flags, out.reply, out.flags)
    };
    assert_eq!(run(), run());
}

#[test]
fn persisted_personas_reload() {
    let dir = tempfile::tempdir().unwrap();
    let open = || {
        PersonaEngine::new(
            PersonaConfig::default(),
            kb(),
            Arc::new(StubClient::new(6)),
            Some(detector()),
            Store::open(dir.path()).unwrap(),
        )
        .unwrap()
    };
    let e = open();
    let rec = e.create_persona(&attrs(), &catalog()).unwrap();
    e.chat_turn(&rec.profile.id, "Hi").unwrap();
    let before = e.get(&rec.profile.id).unwrap();
    drop(e);
    let e = open();
    assert_eq!(e.get(&rec.profile.id).unwrap(), before);
    assert_eq!(e.create_persona(&attrs(), &catalog()).unwrap().profile.id, "persona-2");
}
