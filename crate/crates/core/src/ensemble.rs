//! Three-member voting ensemble and the sentence-level detection pipeline.
//!
//! Decision table for three votes:
//!
//! * all three neutral: `{neutral}`
//! * two or three stereotype votes: every stereotype label that got a vote
//! * exactly one stereotype vote: argmax of the mean distribution
//!
//! Confidence for a label is the mean of the members' probabilities for it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{LabelPredictor, LinearModel, ModelPrediction, SentenceClassifier};
use crate::error::{Error, Result};
use crate::generation::{explanation_template, GenerationClient, GenerationRequest, Task};
use crate::label::{ProbDist, StereotypeLabel};
use crate::segment::{segment, Sentence};

pub const ENSEMBLE_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    /// Either exactly `[neutral]` or one or more stereotype labels, in
    /// canonical order.
    pub labels: Vec<StereotypeLabel>,
    pub confidence: BTreeMap<StereotypeLabel, f64>,
    pub per_model: Vec<ModelPrediction>,
}

impl EnsembleDecision {
    pub fn is_neutral(&self) -> bool {
        self.labels == [StereotypeLabel::Neutral]
    }

    /// Label with the highest confidence, earliest canonical label on ties.
    pub fn primary_label(&self) -> StereotypeLabel {
        let mut best = self.labels[0];
        for l in &self.labels[1..] {
            if self.confidence[l] > self.confidence[&best] {
                best = *l;
            }
        }
        best
    }

    /// Confidence rounded to two decimals, as displayed next to a flag.
    pub fn display_confidence(&self, label: StereotypeLabel) -> Option<f64> {
        self.confidence.get(&label).map(|c| (c * 100.0).round() / 100.0)
    }
}

/// Mean of the members' probabilities for `label`.
pub fn confidence(preds: &[ModelPrediction], label: StereotypeLabel) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().map(|p| p.dist.get(label)).sum::<f64>() / preds.len() as f64
}

/// Combines exactly three member predictions.
pub fn vote(preds: &[ModelPrediction]) -> Result<EnsembleDecision> {
    if preds.len() != ENSEMBLE_SIZE {
        return Err(Error::invalid(format!(
            "ensemble needs exactly {ENSEMBLE_SIZE} predictions, got {}",
            preds.len()
        )));
    }
    let mut ids = BTreeSet::new();
    for p in preds {
        if !ids.insert(p.model_id.as_str()) {
            return Err(Error::invalid(format!("duplicate model id {:?}", p.model_id)));
        }
    }
    let stereotype_votes = preds.iter().filter(|p| p.label.is_stereotype()).count();
    let neutral_votes = preds.len() - stereotype_votes;

    let labels: Vec<StereotypeLabel> = if stereotype_votes == 0 {
        vec![StereotypeLabel::Neutral]
    } else if stereotype_votes > neutral_votes {
        preds
            .iter()
            .map(|p| p.label)
            .filter(|l| l.is_stereotype())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        let mean = ProbDist::mean(preds.iter().map(|p| &p.dist)).expect("three predictions");
        vec![mean.argmax()]
    };

    let confidence = labels.iter().map(|l| (*l, confidence(preds, *l))).collect();
    Ok(EnsembleDecision {
        labels,
        confidence,
        per_model: preds.to_vec(),
    })
}

// =============================================================================
// Explanations
// =============================================================================

const EXPLAIN_SYSTEM: &str = "You review sentences written by a persona generator. \
Answer with exactly one sentence and no preamble.";

fn explain_request(sentence: &str, labels: &[StereotypeLabel]) -> GenerationRequest {
    let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
    let prompt = if labels.len() == 1 {
        format!(
            "The sentence below was classified as {}. In one sentence, point out the assumption or bias \
about {} that it reflects.\n\nSentence: \"{sentence}\"",
            names[0],
            labels[0].display_name().to_lowercase()
        )
    } else {
        format!(
            "The sentence below was classified with several stereotype labels: {}. In one comprehensive \
sentence, explain how each stereotype shows up and how they interact.\n\nSentence: \"{sentence}\"",
            names.join(", ")
        )
    };
    GenerationRequest {
        task: Task::Explain {
            sentence: sentence.to_string(),
            labels: labels.to_vec(),
        },
        system: EXPLAIN_SYSTEM.to_string(),
        prompt,
    }
}

fn explain_with(gen: &dyn GenerationClient, sentence: &str, labels: &[StereotypeLabel]) -> String {
    match gen.generate(&explain_request(sentence, labels)) {
        Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
        Ok(_) => explanation_template(sentence, labels),
        Err(e) => {
            log::warn!("explanation backend failed ({e}); using fallback template");
            explanation_template(sentence, labels)
        }
    }
}

/// Explanation for a sentence carrying one stereotype label.
pub fn explain_single(sentence: &str, label: StereotypeLabel, gen: &dyn GenerationClient) -> Result<String> {
    if !label.is_stereotype() {
        return Err(Error::invalid("neutral sentences are not explained"));
    }
    Ok(explain_with(gen, sentence, &[label]))
}

/// Explanation covering two or more stereotype labels.
pub fn explain_multi(sentence: &str, labels: &[StereotypeLabel], gen: &dyn GenerationClient) -> Result<String> {
    if labels.len() < 2 || labels.iter().any(|l| !l.is_stereotype()) {
        return Err(Error::invalid("multi-label explanation needs two or more stereotype labels"));
    }
    Ok(explain_with(gen, sentence, labels))
}

// =============================================================================
// Detection
// =============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSentence {
    pub sentence: Sentence,
    pub decision: EnsembleDecision,
    pub explanation: Option<String>,
}

/// Wire form of one flagged sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub labels: Vec<StereotypeLabel>,
    pub confidence: BTreeMap<StereotypeLabel, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl From<&FlaggedSentence> for FlagRecord {
    fn from(f: &FlaggedSentence) -> Self {
        FlagRecord {
            text: f.sentence.text.clone(),
            start: f.sentence.start,
            end: f.sentence.end,
            labels: f.decision.labels.clone(),
            confidence: f.decision.confidence.clone(),
            explanation: f.explanation.clone(),
        }
    }
}

pub fn to_wire(flags: &[FlaggedSentence]) -> Vec<FlagRecord> {
    flags.iter().map(FlagRecord::from).collect()
}

/// Three classifiers plus an explanation backend.
#[derive(Clone)]
pub struct Detector {
    members: [Arc<dyn SentenceClassifier>; 3],
    explainer: Arc<dyn GenerationClient>,
    max_in_flight: usize,
}

impl std::fmt::Debug for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Detector")
            .field("members", &self.member_ids())
            .field("explainer", &self.explainer.name())
            .finish()
    }
}

impl Detector {
    pub fn new(members: [Arc<dyn SentenceClassifier>; 3], explainer: Arc<dyn GenerationClient>) -> Result<Self> {
        let ids: BTreeSet<&str> = members.iter().map(|m| m.id()).collect();
        if ids.len() != ENSEMBLE_SIZE {
            return Err(Error::invalid("ensemble members need distinct ids"));
        }
        Ok(Detector {
            members,
            explainer,
            max_in_flight: 4,
        })
    }

    /// Detector over three trained linear models.
    pub fn from_models(models: [LinearModel; 3], explainer: Arc<dyn GenerationClient>) -> Result<Self> {
        let members = models.map(|m| Arc::new(m) as Arc<dyn SentenceClassifier>);
        Self::new(members, explainer)
    }

    /// Caps concurrent explanation requests.
    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn member_ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.id()).collect()
    }

    pub fn decide(&self, sentence: &str) -> EnsembleDecision {
        let preds: Vec<ModelPrediction> = self.members.iter().map(|m| m.predict(sentence)).collect();
        vote(&preds).expect("three members with distinct ids")
    }

    fn explain(&self, sentence: &str, decision: &EnsembleDecision) -> Option<String> {
        if decision.is_neutral() {
            return None;
        }
        Some(explain_with(self.explainer.as_ref(), sentence, &decision.labels))
    }

    /// Segments `text` and classifies every sentence, in order. The input is
    /// never modified.
    pub fn detect(&self, text: &str) -> Vec<FlaggedSentence> {
        let decided: Vec<(Sentence, EnsembleDecision)> = segment(text)
            .into_iter()
            .map(|s| {
                let d = self.decide(&s.text);
                (s, d)
            })
            .collect();

        let mut explanations: Vec<Option<String>> = vec![None; decided.len()];
        let pending: Vec<usize> = (0..decided.len()).filter(|&i| !decided[i].1.is_neutral()).collect();
        for chunk in pending.chunks(self.max_in_flight) {
            let results: Vec<(usize, Option<String>)> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&i| {
                        let (s, d) = &decided[i];
                        scope.spawn(move || (i, self.explain(&s.text, d)))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("explanation thread")).collect()
            });
            for (i, e) in results {
                explanations[i] = e;
            }
        }

        decided
            .into_iter()
            .zip(explanations)
            .map(|((sentence, decision), explanation)| FlaggedSentence {
                sentence,
                decision,
                explanation,
            })
            .collect()
    }
}

impl LabelPredictor for Detector {
    fn predict_label(&self, sentence: &str) -> StereotypeLabel {
        self.decide(sentence).primary_label()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::GenerationError;
    use crate::generation::StubClient;
    use crate::label::StereotypeLabel as L;

    fn pred(id: &str, label: L, p: f64) -> ModelPrediction {
        let mut probs = [(1.0 - p) / 3.0; 4];
        probs[label.index()] = p;
        ModelPrediction::from_dist(id, ProbDist::new(probs).unwrap())
    }

    fn votes(labels: [L; 3]) -> Vec<ModelPrediction> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| pred(&format!("m{i}"), *l, 0.7))
            .collect()
    }

    #[test]
    fn all_neutral() {
        let d = vote(&votes([L::Neutral; 3])).unwrap();
        assert_eq!(d.labels, [L::Neutral]);
        assert!((d.confidence[&L::Neutral] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn two_stereotype_votes() {
        let d = vote(&votes([L::StereotypeDownsyndrome, L::StereotypeDownsyndrome, L::Neutral])).unwrap();
        assert_eq!(d.labels, [L::StereotypeDownsyndrome]);
        let d = vote(&votes([L::StereotypeDownsyndrome, L::StereotypeGender, L::Neutral])).unwrap();
        assert_eq!(d.labels, [L::StereotypeGender, L::StereotypeDownsyndrome]);
    }

    #[test]
    fn lone_stereotype_vote_uses_mean_distribution() {
        let strong = vec![
            pred("a", L::StereotypeGender, 0.99),
            pred("b", L::Neutral, 0.4),
            pred("c", L::Neutral, 0.4),
        ];
        assert_eq!(vote(&strong).unwrap().labels, [L::StereotypeGender]);
        let weak = vec![
            pred("a", L::StereotypeGender, 0.3),
            pred("b", L::Neutral, 0.9),
            pred("c", L::Neutral, 0.9),
        ];
        assert_eq!(vote(&weak).unwrap().labels, [L::Neutral]);
    }

    #[test]
    fn arity_and_duplicates_rejected() {
        assert!(vote(&votes([L::Neutral; 3])[..2]).is_err());
        let mut v = votes([L::Neutral; 3]);
        v[1].model_id = "m0".into();
        assert!(vote(&v).is_err());
    }

    #[test]
    fn confidence_is_mean() {
        let preds = vec![
            pred("a", L::StereotypeGender, 0.9),
            pred("b", L::StereotypeGender, 0.8),
            pred("c", L::StereotypeGender, 0.7),
        ];
        assert!((confidence(&preds, L::StereotypeGender) - 0.8).abs() < 1e-12);
        let uniform: Vec<_> = (0..3)
            .map(|i| ModelPrediction::from_dist(format!("u{i}"), ProbDist::uniform()))
            .collect();
        for l in L::ALL {
            assert_eq!(confidence(&uniform, l), 0.25);
        }
    }

    struct Failing;
    impl GenerationClient for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn generate(&self, _: &GenerationRequest) -> std::result::Result<String, GenerationError> {
            Err(GenerationError::Timeout)
        }
    }

    #[test]
    fn explanations_and_fallback() {
        let stub = StubClient::new(0);
        let one = explain_single("x", L::StereotypeDownsyndrome, &stub).unwrap();
        assert!(one.contains("downsyndrome"));
        let two = explain_multi("x", &[L::StereotypeGender, L::StereotypeProfession], &stub).unwrap();
        assert!(two.contains("gender") && two.contains("profession"));
        let fallback = explain_single("x", L::StereotypeGender, &Failing).unwrap();
        assert_eq!(fallback, explanation_template("x", &[L::StereotypeGender]));
        assert!(explain_single("x", L::Neutral, &stub).is_err());
        assert!(explain_multi("x", &[L::StereotypeGender], &stub).is_err());
    }

    struct Fixed(&'static str, [f64; 4]);
    impl SentenceClassifier for Fixed {
        fn id(&self) -> &str {
            self.0
        }
        fn predict_dist(&self, sentence: &str) -> ProbDist {
            if sentence.contains("always happy") {
                ProbDist::new(self.1).unwrap()
            } else {
                ProbDist::new([0.625, 0.125, 0.125, 0.125]).unwrap()
            }
        }
    }

    fn detector(explainer: Arc<dyn GenerationClient>) -> Detector {
        let flagged = [0.1, 0.1, 0.1, 0.7];
        Detector::new(
            [
                Arc::new(Fixed("a", flagged)),
                Arc::new(Fixed("b", flagged)),
                Arc::new(Fixed("c", [0.6, 0.1, 0.1, 0.2])),
            ],
            explainer,
        )
        .unwrap()
    }

    #[test]
    fn detect_flags_only_stereotyped_sentences() {
        let det = detector(Arc::new(StubClient::new(0)));
        assert!(det.detect("").is_empty());
        let text = "I love swimming. People with Down syndrome are always happy. We went home.";
        let flags = det.detect(text);
        assert_eq!(flags.len(), 3);
        assert!(flags[0].explanation.is_none());
        assert_eq!(flags[1].decision.labels, [L::StereotypeDownsyndrome]);
        assert!((flags[1].decision.confidence[&L::StereotypeDownsyndrome] - 1.6 / 3.0).abs() < 1e-12);
        assert!(flags[1].explanation.as_deref().unwrap().contains("downsyndrome"));
        assert_eq!(flags[1].decision.display_confidence(L::StereotypeDownsyndrome), Some(0.53));
    }

    #[test]
    fn failing_explainer_keeps_flag() {
        let det = detector(Arc::new(Failing));
        let flags = det.detect("They are always happy.");
        assert_eq!(flags[0].decision.labels, [L::StereotypeDownsyndrome]);
        assert!(flags[0].explanation.is_some());
    }

    #[test]
    fn wire_form_omits_absent_explanation() {
        let det = detector(Arc::new(StubClient::new(0)));
        let wire = to_wire(&det.detect("Fine day."));
        let json = serde_json::to_string(&wire).unwrap();
        assert_eq!(
            json,
            r#"[{"text":"Fine day.","start":0,"end":9,"labels":["neutral"],"confidence":{"neutral":0.625}}]"#
        );
    }
}
