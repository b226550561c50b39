//! Labels, probability distributions and labeled dataset rows shared by every
//! other module.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentence-level stereotype class.
///
/// The declaration order is the canonical order used for tie-breaking and
/// serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StereotypeLabel {
    Neutral,
    StereotypeGender,
    StereotypeProfession,
    StereotypeDownsyndrome,
}

impl StereotypeLabel {
    pub const COUNT: usize = 4;

    pub const ALL: [StereotypeLabel; 4] = [
        StereotypeLabel::Neutral,
        StereotypeLabel::StereotypeGender,
        StereotypeLabel::StereotypeProfession,
        StereotypeLabel::StereotypeDownsyndrome,
    ];

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StereotypeLabel::Neutral => "neutral",
            StereotypeLabel::StereotypeGender => "stereotype_gender",
            StereotypeLabel::StereotypeProfession => "stereotype_profession",
            StereotypeLabel::StereotypeDownsyndrome => "stereotype_downsyndrome",
        }
    }

    pub fn is_stereotype(self) -> bool {
        self != StereotypeLabel::Neutral
    }

    /// Name suitable for showing to a reviewer.
    pub fn display_name(self) -> &'static str {
        match self {
            StereotypeLabel::Neutral => "Neutral",
            StereotypeLabel::StereotypeGender => "Gender stereotype",
            StereotypeLabel::StereotypeProfession => "Profession stereotype",
            StereotypeLabel::StereotypeDownsyndrome => "Down syndrome stereotype",
        }
    }
}

impl fmt::Display for StereotypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StereotypeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown label {s:?}")))
    }
}

/// Probability distribution over the four labels in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbDist([f64; 4]);

impl ProbDist {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: [f64; 4]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::invalid(format!(
                "probabilities must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities must sum to 1, got {sum}"
            )));
        }
        Ok(ProbDist(probs))
    }

    pub fn uniform() -> Self {
        ProbDist([0.25; 4])
    }

    pub fn get(&self, label: StereotypeLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    /// Most probable label; the earliest label in canonical order wins ties.
    pub fn argmax(&self) -> StereotypeLabel {
        StereotypeLabel::from_index(argmax_canonical(&self.0)).expect("four entries")
    }

    /// Element-wise mean of several distributions.
    pub fn mean<'a>(dists: impl IntoIterator<Item = &'a ProbDist>) -> Option<ProbDist> {
        let mut acc = [0.0; 4];
        let mut n = 0usize;
        for d in dists {
            for (a, p) in acc.iter_mut().zip(d.0.iter()) {
                *a += p;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        Some(ProbDist(acc.map(|a| a / n as f64)))
    }
}

/// Index of the maximum entry, first index on ties.
pub(crate) fn argmax_canonical(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl Serialize for ProbDist {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<StereotypeLabel, f64> =
            StereotypeLabel::ALL.iter().map(|l| (*l, self.get(*l))).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProbDist {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<StereotypeLabel, f64>::deserialize(deserializer)?;
        let mut probs = [f64::NAN; 4];
        for (label, p) in map {
            probs[label.index()] = p;
        }
        ProbDist::new(probs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    Family,
    Education,
    Employment,
}

impl Theme {
    pub const ALL: [Theme; 3] = [Theme::Family, Theme::Education, Theme::Employment];

    pub fn as_str(self) -> &'static str {
        match self {
            Theme::Family => "family",
            Theme::Education => "education",
            Theme::Employment => "employment",
        }
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown theme {s:?}")))
    }
}

/// Where a training row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Imported,
    Seed,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: StereotypeLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theme: Option<Theme>,
    pub provenance: Provenance,
}

impl LabeledExample {
    pub fn new(
        text: impl Into<String>,
        label: StereotypeLabel,
        theme: Option<Theme>,
        provenance: Provenance,
    ) -> Result<Self> {
        let example = LabeledExample {
            text: text.into(),
            label,
            theme,
            provenance,
        };
        example.validate()?;
        Ok(example)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::invalid("example text is empty"));
        }
        let needs_theme = self.label == StereotypeLabel::StereotypeDownsyndrome
            && matches!(self.provenance, Provenance::Seed | Provenance::Generated);
        if needs_theme && self.theme.is_none() {
            return Err(Error::invalid(format!(
                "down syndrome example without theme: {:?}",
                self.text
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Per-label counts in canonical order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts(pub [usize; 4]);

impl LabelCounts {
    pub fn tally<'a>(examples: impl IntoIterator<Item = &'a LabeledExample>) -> Self {
        let mut counts = [0; 4];
        for ex in examples {
            counts[ex.label.index()] += 1;
        }
        LabelCounts(counts)
    }

    pub fn get(&self, label: StereotypeLabel) -> usize {
        self.0[label.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Serialize for LabelCounts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<StereotypeLabel, usize> =
            StereotypeLabel::ALL.iter().map(|l| (*l, self.get(*l))).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelCounts {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<StereotypeLabel, usize>::deserialize(deserializer)?;
        let mut counts = [0; 4];
        for (label, c) in map {
            counts[label.index()] = c;
        }
        Ok(LabelCounts(counts))
    }
}

/// Test split label counts and split sizes reported for the original corpus.
/// The label counts sum to 1,795 while the stated test size is 1,769.
pub const REFERENCE_TEST_COUNTS: LabelCounts = LabelCounts([896, 218, 647, 34]);
pub const REFERENCE_TRAIN_SIZE: usize = 16_139;
pub const REFERENCE_TEST_SIZE: usize = 1_769;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub label_counts: BTreeMap<Split, LabelCounts>,
}

impl Dataset {
    /// Builds a dataset and fills in its label counts. Fails when a text
    /// appears in both splits.
    pub fn new(train: Vec<LabeledExample>, test: Vec<LabeledExample>) -> Result<Self> {
        let train_texts: HashSet<&str> = train.iter().map(|e| e.text.as_str()).collect();
        if let Some(dup) = test.iter().find(|e| train_texts.contains(e.text.as_str())) {
            return Err(Error::invalid(format!(
                "text appears in both train and test: {:?}",
                dup.text
            )));
        }
        for ex in train.iter().chain(test.iter()) {
            ex.validate()?;
        }
        let mut label_counts = BTreeMap::new();
        label_counts.insert(Split::Train, LabelCounts::tally(&train));
        label_counts.insert(Split::Test, LabelCounts::tally(&test));
        Ok(Dataset {
            train,
            test,
            label_counts,
        })
    }

    pub fn empty() -> Self {
        Dataset::new(Vec::new(), Vec::new()).expect("empty dataset is valid")
    }

    pub fn split(&self, split: Split) -> &[LabeledExample] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Writes the header record followed by one record per example.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        self.write_jsonl_with_declared(&mut out, None)
    }

    /// Like [`Dataset::write_jsonl`], recording externally declared split
    /// sizes in the header.
    pub fn write_jsonl_with_declared<W: Write>(
        &self,
        mut out: W,
        declared: Option<DeclaredSizes>,
    ) -> Result<()> {
        let header = DatasetHeader {
            train_size: self.train.len(),
            test_size: self.test.len(),
            label_counts: self.label_counts.clone(),
            declared,
        };
        serde_json::to_writer(&mut out, &HeaderLine { header })?;
        out.write_all(b"\n")?;
        for (split, ex) in self
            .train
            .iter()
            .map(|e| (Split::Train, e))
            .chain(self.test.iter().map(|e| (Split::Test, e)))
        {
            serde_json::to_writer(&mut out, &RecordLine { split, example: ex.clone() })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a dataset file. Header label counts must equal a recount of the
    /// records; a declared size that disagrees only produces a warning.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<LoadedDataset> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::invalid("dataset file is empty"))??;
        let HeaderLine { header } = serde_json::from_str(&first)
            .map_err(|e| Error::invalid(format!("bad dataset header: {e}")))?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 2)))?;
            match rec.split {
                Split::Train => train.push(rec.example),
                Split::Test => test.push(rec.example),
            }
        }
        let dataset = Dataset::new(train, test)?;
        if dataset.label_counts != header.label_counts {
            return Err(Error::invalid(
                "header label counts do not match the records",
            ));
        }
        let mut warnings = Vec::new();
        if header.train_size != dataset.train.len() || header.test_size != dataset.test.len() {
            return Err(Error::invalid("header split sizes do not match the records"));
        }
        if let Some(declared) = header.declared {
            for (split, stated) in [(Split::Train, declared.train), (Split::Test, declared.test)] {
                let counted = dataset.label_counts[&split].total();
                if stated != counted {
                    let msg = format!(
                        "{split:?} split: declared size {stated} but label counts sum to {counted}"
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        Ok(LoadedDataset { dataset, declared: header.declared, warnings })
    }
}

/// Split sizes stated by an external source, kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredSizes {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub declared: Option<DeclaredSizes>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    train_size: usize,
    test_size: usize,
    label_counts: BTreeMap<Split, LabelCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared: Option<DeclaredSizes>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    header: DatasetHeader,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    split: Split,
    #[serde(flatten)]
    example: LabeledExample,
}

/// Per-split label counts, recomputed from the examples.
pub fn label_stats(dataset: &Dataset) -> BTreeMap<Split, LabelCounts> {
    [Split::Train, Split::Test]
        .into_iter()
        .map(|s| (s, LabelCounts::tally(dataset.split(s))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(text: &str, label: StereotypeLabel) -> LabeledExample {
        LabeledExample::new(text, label, Some(Theme::Family), Provenance::Seed).unwrap()
    }

    #[test]
    fn canonical_order_and_names() {
        let names: Vec<_> = StereotypeLabel::ALL.iter().map(|l| l.as_str()).collect();
        assert_eq!(
            names,
            [
                "neutral",
                "stereotype_gender",
                "stereotype_profession",
                "stereotype_downsyndrome"
            ]
        );
        for l in StereotypeLabel::ALL {
            assert_eq!(l.as_str().parse::<StereotypeLabel>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{}\"", l.as_str()));
        }
        assert!("stereotype_race".parse::<StereotypeLabel>().is_err());
    }

    #[test]
    fn prob_dist_validation() {
        assert!(ProbDist::new([0.25; 4]).is_ok());
        assert!(ProbDist::new([0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(ProbDist::new([1.5, -0.5, 0.0, 0.0]).is_err());
        assert!(ProbDist::new([f64::NAN, 0.0, 0.0, 1.0]).is_err());
        assert_eq!(ProbDist::uniform().argmax(), StereotypeLabel::Neutral);
        let d = ProbDist::new([0.1, 0.4, 0.4, 0.1]).unwrap();
        assert_eq!(d.argmax(), StereotypeLabel::StereotypeGender);
    }

    #[test]
    fn prob_dist_serializes_as_label_map() {
        let d = ProbDist::new([0.4, 0.2, 0.2, 0.2]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"neutral":0.4,"stereotype_gender":0.2,"stereotype_profession":0.2,"stereotype_downsyndrome":0.2}"#
        );
        let back: ProbDist = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<ProbDist>(r#"{"neutral":1.0}"#).is_err());
    }

    #[test]
    fn example_invariants() {
        assert!(LabeledExample::new("  ", StereotypeLabel::Neutral, None, Provenance::Imported).is_err());
        assert!(LabeledExample::new(
            "x",
            StereotypeLabel::StereotypeDownsyndrome,
            None,
            Provenance::Generated
        )
        .is_err());
        assert!(LabeledExample::new(
            "x",
            StereotypeLabel::StereotypeDownsyndrome,
            None,
            Provenance::Imported
        )
        .is_ok());
    }

    #[test]
    fn label_stats_counts() {
        assert_eq!(label_stats(&Dataset::empty())[&Split::Train], LabelCounts([0; 4]));
        assert_eq!(label_stats(&Dataset::empty())[&Split::Test], LabelCounts([0; 4]));

        let d = Dataset::new(
            vec![
                ex("a", StereotypeLabel::Neutral),
                ex("b", StereotypeLabel::Neutral),
                ex("c", StereotypeLabel::Neutral),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(label_stats(&d)[&Split::Train], LabelCounts([3, 0, 0, 0]));
    }

    #[test]
    fn label_stats_on_reference_sized_split() {
        let mut test = Vec::new();
        for label in StereotypeLabel::ALL {
            for i in 0..REFERENCE_TEST_COUNTS.get(label) {
                test.push(
                    LabeledExample::new(
                        format!("{label} sentence {i}"),
                        label,
                        Some(Theme::Education),
                        Provenance::Imported,
                    )
                    .unwrap(),
                );
            }
        }
        let d = Dataset::new(vec![], test).unwrap();
        let stats = label_stats(&d);
        let t = stats[&Split::Test];
        assert_eq!(t.get(StereotypeLabel::Neutral), 896);
        assert_eq!(t.get(StereotypeLabel::StereotypeProfession), 647);
        assert_eq!(t.get(StereotypeLabel::StereotypeGender), 218);
        assert_eq!(t.get(StereotypeLabel::StereotypeDownsyndrome), 34);
        assert_eq!(t.total(), 1795);
    }

    #[test]
    fn overlapping_splits_rejected() {
        let err = Dataset::new(
            vec![ex("same", StereotypeLabel::Neutral)],
            vec![ex("same", StereotypeLabel::StereotypeGender)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn declared_size_mismatch_warns_but_loads() {
        let d = Dataset::new(vec![ex("a", StereotypeLabel::Neutral)], vec![ex("b", StereotypeLabel::Neutral)])
            .unwrap();
        let mut buf = Vec::new();
        d.write_jsonl_with_declared(&mut buf, Some(DeclaredSizes { train: 1, test: 5 }))
            .unwrap();
        let loaded = Dataset::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(loaded.dataset, d);
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn tampered_counts_rejected() {
        let d = Dataset::new(vec![ex("a", StereotypeLabel::Neutral)], vec![]).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\"neutral\":1", "\"neutral\":2", 1);
        assert!(Dataset::read_jsonl(text.as_bytes()).is_err());
    }

    fn arb_example() -> impl Strategy<Value = LabeledExample> {
        (
            "[a-zA-Z][a-zA-Z ,.'!?é]{0,40}",
            0usize..4,
            proptest::option::of(0usize..3),
            0usize..3,
        )
            .prop_map(|(text, l, theme, p)| {
                let provenance = [Provenance::Imported, Provenance::Seed, Provenance::Generated][p];
                let label = StereotypeLabel::ALL[l];
                let mut theme = theme.map(|t| Theme::ALL[t]);
                if label == StereotypeLabel::StereotypeDownsyndrome && theme.is_none() {
                    theme = Some(Theme::Family);
                }
                LabeledExample { text, label, theme, provenance }
            })
    }

    proptest! {
        #[test]
        fn dataset_round_trip(examples in proptest::collection::vec(arb_example(), 0..30), cut in 0usize..30) {
            let mut seen = HashSet::new();
            let unique: Vec<_> = examples.into_iter().filter(|e| seen.insert(e.text.clone())).collect();
            let cut = cut.min(unique.len());
            let (train, test) = unique.split_at(cut);
            let d = Dataset::new(train.to_vec(), test.to_vec()).unwrap();
            let mut buf = Vec::new();
            d.write_jsonl(&mut buf).unwrap();
            let back = Dataset::read_jsonl(buf.as_slice()).unwrap().dataset;
            prop_assert_eq!(&back, &d);
            let stats = label_stats(&back);
            prop_assert_eq!(stats[&Split::Train].total(), back.train.len());
            prop_assert_eq!(stats[&Split::Test].total(), back.test.len());
        }
    }
}
