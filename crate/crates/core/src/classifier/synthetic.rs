//! Synthetic four-class corpus built from label-specific phrase pools, plus
//! a helper that trains three reference models on it.
//!
//! Every sentence is `<subject> <phrase> and <phrase>.` with both phrases
//! drawn from the label's pool; subjects are shared by all labels.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::LinearModel;
use super::train::{train, ModelSpec, TrainingConfig};
use crate::error::Result;
use crate::label::{LabeledExample, Provenance, StereotypeLabel, Theme};

pub const SUBJECTS: &[&str] = &[
    "My cousin", "Our neighbor", "The new student", "My sister", "My brother",
    "Their friend", "The young woman", "The young man", "Our classmate", "My coworker",
];

pub const NEUTRAL_PHRASES: &[&str] = &[
    "enjoys painting on weekends",
    "walks the dog every morning",
    "likes listening to music",
    "takes the bus downtown",
    "plays soccer with friends",
    "reads comic books at night",
    "helps cook dinner on sundays",
    "visits the library each week",
    "loves swimming at the pool",
    "practices piano after lunch",
    "grows tomatoes in the garden",
    "watches movies with family",
    "has down syndrome and works at the bakery",
    "with down syndrome joined the college art program",
    "has a paid job at the shop with a job coach",
    "learns new words with picture cards",
    "works with customers at the front desk",
    "with down syndrome lives in a shared flat",
];

pub const GENDER_PHRASES: &[&str] = &[
    "is too emotional to lead because she is a woman",
    "should stay home since women belong in the kitchen",
    "must be the breadwinner because men provide",
    "cannot fix cars like a real man",
    "is bad at math because girls are weaker",
    "should never cry since boys must be tough",
    "needs a husband to make decisions",
    "is naturally nurturing as every mother is",
    "will marry instead of building a career as girls do",
    "is aggressive because men are violent",
];

pub const PROFESSION_PHRASES: &[&str] = &[
    "is a nurse so she must be gentle and submissive",
    "works as an engineer and is socially awkward",
    "is a lawyer and therefore dishonest",
    "became a librarian so is quiet and boring",
    "is a construction worker and uneducated",
    "works in finance so is greedy",
    "is a politician and cannot be trusted",
    "is a chef who must be hot tempered",
    "is a scientist so lacks common sense",
    "is a salesman and always pushy",
];

pub const DOWNSYNDROME_PHRASES: &[&str] = &[
    "has down syndrome and is always happy",
    "with down syndrome will never hold a real job",
    "cannot learn anything new because of down syndrome",
    "needs help with every single task due to the condition",
    "will stay like a child forever",
    "should only do simple repetitive chores",
    "is incapable of living independently",
    "can never understand money",
    "is too slow for a regular classroom",
    "will always depend on parents",
];

pub fn phrases(label: StereotypeLabel) -> &'static [&'static str] {
    match label {
        StereotypeLabel::Neutral => NEUTRAL_PHRASES,
        StereotypeLabel::StereotypeGender => GENDER_PHRASES,
        StereotypeLabel::StereotypeProfession => PROFESSION_PHRASES,
        StereotypeLabel::StereotypeDownsyndrome => DOWNSYNDROME_PHRASES,
    }
}

/// One synthetic sentence for `label`.
pub fn sentence<R: Rng>(label: StereotypeLabel, rng: &mut R) -> String {
    let pool = phrases(label);
    let subject = SUBJECTS.choose(rng).expect("non-empty");
    let first = pool.choose(rng).expect("non-empty");
    let mut second = pool.choose(rng).expect("non-empty");
    while second == first {
        second = pool.choose(rng).expect("non-empty");
    }
    format!("{subject} {first} and {second}.")
}

/// Generates `n_train + n_test` distinct examples with labels cycling through
/// the canonical order, split into train and test without text overlap.
pub fn keyword_corpus(n_train: usize, n_test: usize, seed: u64) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut all = Vec::with_capacity(n_train + n_test);
    while all.len() < n_train + n_test {
        let i = all.len();
        let label = StereotypeLabel::ALL[i % 4];
        let text = sentence(label, &mut rng);
        if !seen.insert(text.clone()) {
            continue;
        }
        let theme = (label == StereotypeLabel::StereotypeDownsyndrome).then(|| Theme::ALL[(i / 4) % 3]);
        all.push(LabeledExample {
            text,
            label,
            theme,
            provenance: Provenance::Generated,
        });
    }
    let test = all.split_off(n_train);
    (all, test)
}

/// Feature seeds of the three reference ensemble members.
pub const REFERENCE_SEEDS: [u64; 3] = [0x5eed_0001, 0x5eed_0002, 0x5eed_0003];
pub const REFERENCE_IDS: [&str; 3] = ["reference-a", "reference-b", "reference-c"];

/// Trains the three reference models on a 500-sentence synthetic corpus.
pub fn reference_models(feature_dim: usize, corpus_seed: u64) -> Result<[LinearModel; 3]> {
    let (train_set, _) = keyword_corpus(500, 0, corpus_seed);
    let cfg = TrainingConfig {
        rng_seed: corpus_seed,
        ..TrainingConfig::default()
    };
    let mut out = Vec::with_capacity(3);
    for (id, seed) in REFERENCE_IDS.iter().zip(REFERENCE_SEEDS) {
        let spec = ModelSpec::new(*id, seed).with_dim(feature_dim);
        out.push(train(&spec, &train_set, &[], &cfg)?.model);
    }
    Ok(out.try_into().expect("three models"))
}
