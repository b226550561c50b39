//! Text-generation backends.
//!
//! Every caller builds a [`GenerationRequest`] carrying both the rendered
//! prompt (what a hosted model sees) and a structured [`Task`] (what the
//! deterministic [`StubClient`] expands from). [`RemoteClient`] speaks the
//! common chat-completions JSON protocol.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::features::seeded_hash;
use crate::classifier::synthetic;
use crate::error::GenerationError;
use crate::label::{StereotypeLabel, Theme};

/// Persona attributes a generator needs to stay in character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaBrief {
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub condition: String,
    pub theme: Theme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    /// One-sentence explanation of why `sentence` carries `labels`.
    Explain {
        sentence: String,
        labels: Vec<StereotypeLabel>,
    },
    /// Label-preserving rewrite of a seed sentence.
    Augment {
        seed: String,
        label: StereotypeLabel,
        theme: Theme,
        variant: u64,
    },
    /// First-person persona narrative.
    Narrative {
        persona: PersonaBrief,
        passages: Vec<String>,
    },
    /// In-character reply during a chat session.
    ChatReply {
        persona: PersonaBrief,
        message: String,
        passages: Vec<String>,
    },
    /// Single-paragraph answer to a question; `passages` is empty for the
    /// ungrounded arm of a comparison.
    Answer {
        persona: PersonaBrief,
        question: String,
        passages: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub task: Task,
    pub system: String,
    pub prompt: String,
}

pub trait GenerationClient: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<String, GenerationError>;
}

impl<T: GenerationClient + ?Sized> GenerationClient for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        (**self).generate(request)
    }
}

// =============================================================================
// Stub
// =============================================================================

/// Deterministic template expansion keyed by a seed and the request.
#[derive(Debug, Clone, Default)]
pub struct StubClient {
    pub seed: u64,
}

impl StubClient {
    pub fn new(seed: u64) -> Self {
        StubClient { seed }
    }

    fn key(&self, request: &GenerationRequest) -> u64 {
        let task = serde_json::to_string(&request.task).unwrap_or_default();
        seeded_hash(self.seed, format!("{task}\u{1f}{}", request.prompt).as_bytes())
    }
}

impl GenerationClient for StubClient {
    fn name(&self) -> &str {
        "stub"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        let mut rng = Picker(self.key(request));
        let text = match &request.task {
            Task::Explain { sentence, labels } => explanation_template(sentence, labels),
            Task::Augment { seed, variant, .. } => augment_variant(seed, *variant),
            Task::Narrative { persona, passages } => {
                let mut out = vec![introduction(persona)];
                out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                if let Some(p) = passages.first() {
                    out.push(grounding_sentence(p));
                }
                out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                if rng.chance(3) {
                    out.push(risky_sentence(&mut rng));
                }
                out.push(closing(persona));
                dedup_join(out)
            }
            Task::ChatReply { persona, message, passages } => {
                let mut out = vec![format!(
                    "You asked about {}.",
                    topic_of(message)
                )];
                out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                if let Some(p) = passages.first() {
                    out.push(grounding_sentence(p));
                }
                if rng.chance(4) {
                    out.push(risky_sentence(&mut rng));
                }
                dedup_join(out)
            }
            Task::Answer { persona, question, passages } => {
                let grounded = !passages.is_empty();
                let mut out = vec![format!("About {}, here is my answer.", topic_of(question))];
                out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                if grounded {
                    out.push(grounding_sentence(&passages[rng.below(passages.len())]));
                } else {
                    out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                }
                let risk = if grounded { 4 } else { 2 };
                if rng.chance(risk) {
                    out.push(risky_sentence(&mut rng));
                }
                if !grounded {
                    out.push(rng.pick(theme_sentences(persona.theme)).to_string());
                }
                dedup_join(out)
            }
        };
        Ok(text)
    }
}

/// Tiny deterministic chooser driven by a hash state.
struct Picker(u64);

impl Picker {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        seeded_hash(self.0, b"pick")
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items[self.below(items.len())]
    }

    /// True with probability `1/n`.
    fn chance(&mut self, n: u64) -> bool {
        self.next().is_multiple_of(n)
    }
}

fn dedup_join(sentences: Vec<String>) -> String {
    let mut seen = std::collections::HashSet::new();
    sentences
        .into_iter()
        .filter(|s| seen.insert(s.clone()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn group_phrase(label: StereotypeLabel) -> &'static str {
    match label {
        StereotypeLabel::Neutral => "no group",
        StereotypeLabel::StereotypeGender => "gender roles",
        StereotypeLabel::StereotypeProfession => "people in a particular profession",
        StereotypeLabel::StereotypeDownsyndrome => "people with Down syndrome",
    }
}

/// Explanation template used by the stub and as the fallback when a backend
/// fails.
pub fn explanation_template(sentence: &str, labels: &[StereotypeLabel]) -> String {
    let flagged: Vec<StereotypeLabel> = labels.iter().copied().filter(|l| l.is_stereotype()).collect();
    match flagged.as_slice() {
        [] => "No stereotypes were detected in this sentence.".to_string(),
        [one] => format!(
            "The sentence \"{sentence}\" was flagged as {one} because it relies on a generalized assumption about {} rather than on the individual described.",
            group_phrase(*one)
        ),
        many => {
            let names: Vec<&str> = many.iter().map(|l| l.as_str()).collect();
            let groups: Vec<&str> = many.iter().map(|l| group_phrase(*l)).collect();
            format!(
                "The sentence \"{sentence}\" was flagged as {} because it combines generalized assumptions about {} that reinforce each other in this context.",
                join_and(&names),
                join_and(&groups)
            )
        }
    }
}

fn join_and(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn introduction(p: &PersonaBrief) -> String {
    format!(
        "I am {} years old, I identify as {}, and I work as {} {}.",
        p.age,
        p.gender.to_lowercase(),
        article(&p.occupation),
        p.occupation.to_lowercase()
    )
}

fn closing(p: &PersonaBrief) -> String {
    format!(
        "Living with {} is one part of who I am, and I like to be asked what I want.",
        p.condition
    )
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn topic_of(text: &str) -> String {
    let words: Vec<String> = crate::classifier::features::tokenize(text)
        .into_iter()
        .filter(|w| w.len() > 3)
        .take(3)
        .collect();
    if words.is_empty() {
        "that".to_string()
    } else {
        format!("\"{}\"", words.join(" "))
    }
}

fn grounding_sentence(passage: &str) -> String {
    let first = crate::segment::segment(passage)
        .into_iter()
        .next()
        .map(|s| s.text)
        .unwrap_or_default();
    let trimmed = first.trim_end_matches(['.', '!', '?']);
    format!("I read that {}.", lower_first(trimmed))
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn risky_sentence(rng: &mut Picker) -> String {
    let label = StereotypeLabel::ALL[1 + rng.below(3)];
    let phrase = rng.pick(synthetic::phrases(label));
    format!("Some people assume that someone like me {phrase}.")
}

fn theme_sentences(theme: Theme) -> &'static [&'static str] {
    match theme {
        Theme::Family => &[
            "I like listening to music with my family.",
            "I help cook dinner on sundays with my mom.",
            "My sister and I watch movies together on friday nights.",
            "I walk the dog every morning with my dad.",
            "We visit my grandparents and play board games.",
        ],
        Theme::Education => &[
            "I visit the library each week to find new comic books.",
            "At school I practice piano after lunch.",
            "My favorite class is art because I enjoy painting.",
            "I take the bus to school with my friends.",
            "I study with a classmate before every test.",
        ],
        Theme::Employment => &[
            "At work I greet customers and keep the shelves tidy.",
            "I take the bus downtown to get to my job.",
            "My coworker and I plan the schedule every morning.",
            "I like my job because I meet new people every day.",
            "After work I play soccer with friends.",
        ],
    }
}

// Augmentation variants: prefix x suffix x synonym mask.
const PREFIXES: &[&str] = &[
    "", "Honestly, ", "To be fair, ", "Sometimes ", "In practice, ", "Often ", "Clearly, ", "Of course ",
];
const SUFFIXES: &[&str] = &["", " these days", " in my experience", " at home", " at school", " at work"];
const SYNONYMS: &[(&str, &str)] = &[
    ("always", "constantly"),
    ("never", "not ever"),
    ("cannot", "can't"),
    ("help", "support"),
    ("job", "position"),
    ("school", "class"),
    ("family", "household"),
    ("happy", "cheerful"),
    ("learn", "pick up"),
    ("work", "employment"),
    ("needs", "requires"),
    ("very", "really"),
    ("people", "folks"),
    ("simple", "easy"),
    ("parents", "mom and dad"),
];

/// Deterministic label-preserving variant of `seed`. Variant 0 is the seed
/// itself.
pub fn augment_variant(seed: &str, variant: u64) -> String {
    let n_prefix = PREFIXES.len() as u64;
    let n_suffix = SUFFIXES.len() as u64;
    let prefix = PREFIXES[(variant % n_prefix) as usize];
    let suffix = SUFFIXES[((variant / n_prefix) % n_suffix) as usize];
    let mut mask = variant / (n_prefix * n_suffix);

    let body = seed.trim();
    let (body, terminal) = match body.char_indices().last() {
        Some((i, c)) if matches!(c, '.' | '!' | '?') => (&body[..i], c),
        _ => (body, '.'),
    };
    let mut words: Vec<String> = Vec::new();
    for word in body.split_whitespace() {
        let lower = word.to_lowercase();
        let core = lower.trim_matches(|c: char| !c.is_alphanumeric());
        match SYNONYMS.iter().find(|(w, _)| *w == core) {
            Some((from, to)) => {
                if mask & 1 == 1 {
                    words.push(word.to_lowercase().replacen(from, to, 1));
                } else {
                    words.push(word.to_string());
                }
                mask >>= 1;
            }
            None => words.push(word.to_string()),
        }
    }
    let mut text = words.join(" ");
    if !prefix.is_empty() {
        text = format!("{prefix}{}", lower_first(&text));
    }
    format!("{text}{suffix}{terminal}")
}

// =============================================================================
// Remote
// =============================================================================

/// Chat-completions client for a hosted model.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatContent,
}

#[derive(Deserialize)]
struct ChatContent {
    content: String,
}

impl RemoteClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, GenerationError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        Ok(RemoteClient {
            endpoint: endpoint.into(),
            api_key,
            model: model.into(),
            http,
        })
    }
}

impl GenerationClient for RemoteClient {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        let body = ChatBody {
            model: &self.model,
            messages: vec![
                ChatMessage { role: "system", content: &request.system },
                ChatMessage { role: "user", content: &request.prompt },
            ],
            temperature: 0.0,
        };
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GenerationError::Timeout
            } else {
                GenerationError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(GenerationError::Status { status: status.as_u16(), body });
        }
        let parsed: ChatResponse = resp.json().map_err(|e| {
            if e.is_timeout() {
                GenerationError::Timeout
            } else {
                GenerationError::Malformed(e.to_string())
            }
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.trim().to_string())
            .ok_or_else(|| GenerationError::Malformed("no choices in response".into()))
    }
}

// =============================================================================
// Selection
// =============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    #[default]
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub mode: GenerationMode,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    pub timeout_secs: u64,
    pub stub_seed: u64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            mode: GenerationMode::Stub,
            endpoint: None,
            api_key_env: "PERSONAFLAG_GENERATION_KEY".into(),
            model: "gpt-4o".into(),
            timeout_secs: 30,
            stub_seed: 0,
        }
    }
}

pub const ENV_MODE: &str = "PERSONAFLAG_GENERATION_MODE";
pub const ENV_URL: &str = "PERSONAFLAG_GENERATION_URL";
pub const ENV_MODEL: &str = "PERSONAFLAG_GENERATION_MODEL";

impl GenerationSettings {
    /// Overrides mode, endpoint and model from the environment.
    pub fn apply_env(mut self) -> Result<Self, GenerationError> {
        if let Ok(mode) = std::env::var(ENV_MODE) {
            self.mode = match mode.trim().to_ascii_lowercase().as_str() {
                "stub" => GenerationMode::Stub,
                "remote" => GenerationMode::Remote,
                other => return Err(GenerationError::Other(format!("unknown generation mode {other:?}"))),
            };
        }
        if let Ok(url) = std::env::var(ENV_URL) {
            self.endpoint = Some(url);
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            self.model = model;
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<std::sync::Arc<dyn GenerationClient>, GenerationError> {
        match self.mode {
            GenerationMode::Stub => Ok(std::sync::Arc::new(StubClient::new(self.stub_seed))),
            GenerationMode::Remote => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| GenerationError::Other("remote mode needs an endpoint URL".into()))?;
                let key = std::env::var(&self.api_key_env).ok();
                Ok(std::sync::Arc::new(RemoteClient::new(
                    endpoint,
                    key,
                    self.model.clone(),
                    Duration::from_secs(self.timeout_secs),
                )?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explain(labels: Vec<StereotypeLabel>) -> GenerationRequest {
        GenerationRequest {
            task: Task::Explain { sentence: "He can't cook.".into(), labels },
            system: String::new(),
            prompt: "p".into(),
        }
    }

    #[test]
    fn stub_is_deterministic() {
        let c = StubClient::new(1);
        let req = explain(vec![StereotypeLabel::StereotypeGender]);
        assert_eq!(c.generate(&req).unwrap(), c.generate(&req).unwrap());
    }

    #[test]
    fn explanation_names_labels() {
        let one = explanation_template("x", &[StereotypeLabel::StereotypeDownsyndrome]);
        assert!(one.contains("downsyndrome"));
        let two = explanation_template(
            "x",
            &[StereotypeLabel::StereotypeGender, StereotypeLabel::StereotypeProfession],
        );
        assert!(two.contains("stereotype_gender") && two.contains("stereotype_profession"));
    }

    #[test]
    fn augment_variants_are_distinct() {
        let seed = "She will never get a job.";
        assert_eq!(augment_variant(seed, 0), seed);
        let variants: std::collections::HashSet<String> =
            (0..200).map(|v| augment_variant(seed, v)).collect();
        assert!(variants.len() >= 190, "{}", variants.len());
        assert_eq!(augment_variant(seed, 1), "Honestly, she will never get a job.");
    }

    #[test]
    fn remote_requires_endpoint() {
        let s = GenerationSettings { mode: GenerationMode::Remote, ..Default::default() };
        assert!(s.build().is_err());
    }

    #[test]
    fn remote_timeout_maps_to_timeout_error() {
        // A listener that accepts but never answers.
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let _hold = std::thread::spawn(move || {
            let conns: Vec<_> = listener.incoming().take(1).collect();
            std::thread::sleep(Duration::from_secs(2));
            drop(conns);
        });
        let client = RemoteClient::new(
            format!("http://{addr}/v1/chat/completions"),
            None,
            "m",
            Duration::from_millis(200),
        )
        .unwrap();
        let err = client.generate(&explain(vec![StereotypeLabel::StereotypeGender])).unwrap_err();
        assert_eq!(err, GenerationError::Timeout);
    }
}
