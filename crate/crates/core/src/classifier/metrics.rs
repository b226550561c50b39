//! Accuracy, precision, recall and F1 from a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{LabeledExample, StereotypeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores for an arbitrary number of classes.
///
/// `confusion[gold][predicted]` counts examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionScores {
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
}

impl ConfusionScores {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("confusion matrix must be square and non-empty"));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("confusion matrix is empty"));
        }
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassScores> = (0..k)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let support: u64 = confusion[c].iter().sum();
                let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted as f64);
                let recall = ratio(tp, support as f64);
                ClassScores {
                    precision,
                    recall,
                    f1: harmonic(precision, recall),
                    support,
                }
            })
            .collect();
        let avg = |weight: &dyn Fn(&ClassScores) -> f64| {
            let wsum: f64 = per_class.iter().map(weight).sum();
            let mean = |f: fn(&ClassScores) -> f64| {
                per_class.iter().map(|c| weight(c) * f(c)).sum::<f64>() / wsum
            };
            Averages {
                precision: mean(|c| c.precision),
                recall: mean(|c| c.recall),
                f1: mean(|c| c.f1),
            }
        };
        let macro_avg = avg(&|_| 1.0);
        let weighted_avg = avg(&|c| c.support as f64);
        Ok(ConfusionScores {
            accuracy: trace as f64 / total as f64,
            confusion,
            per_class,
            macro_avg,
            weighted_avg,
        })
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Four-label evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub per_label: Vec<(StereotypeLabel, ClassScores)>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub confusion: [[u64; 4]; 4],
}

impl EvalMetrics {
    pub fn from_confusion(confusion: [[u64; 4]; 4]) -> Result<Self> {
        let scores = ConfusionScores::from_confusion(confusion.iter().map(|r| r.to_vec()).collect())?;
        Ok(EvalMetrics {
            accuracy: scores.accuracy,
            per_label: StereotypeLabel::ALL.iter().copied().zip(scores.per_class).collect(),
            macro_avg: scores.macro_avg,
            weighted_avg: scores.weighted_avg,
            confusion,
        })
    }

    pub fn label(&self, label: StereotypeLabel) -> &ClassScores {
        &self.per_label[label.index()].1
    }
}

/// Anything that assigns a single label to a sentence.
pub trait LabelPredictor {
    fn predict_label(&self, sentence: &str) -> StereotypeLabel;
}

impl<F: Fn(&str) -> StereotypeLabel> LabelPredictor for F {
    fn predict_label(&self, sentence: &str) -> StereotypeLabel {
        self(sentence)
    }
}

impl LabelPredictor for super::LinearModel {
    fn predict_label(&self, sentence: &str) -> StereotypeLabel {
        self.classify(sentence).0
    }
}

pub fn evaluate(predictor: &dyn LabelPredictor, test: &[LabeledExample]) -> Result<EvalMetrics> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let mut confusion = [[0u64; 4]; 4];
    for ex in test {
        let predicted = predictor.predict_label(&ex.text);
        confusion[ex.label.index()][predicted.index()] += 1;
    }
    EvalMetrics::from_confusion(confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Provenance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictions() {
        let test: Vec<_> = StereotypeLabel::ALL
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledExample::new(format!("s{i}"), *l, None, Provenance::Imported).unwrap())
            .collect();
        let gold: std::collections::HashMap<String, StereotypeLabel> =
            test.iter().map(|e| (e.text.clone(), e.label)).collect();
        let oracle = move |s: &str| gold[s];
        let m = evaluate(&oracle, &test).unwrap();
        assert_eq!(m.accuracy, 1.0);
        for (_, s) in &m.per_label {
            assert_eq!(s.f1, 1.0);
        }
        assert_eq!(m.macro_avg.f1, 1.0);
    }

    #[test]
    fn degenerate_two_label_matrix() {
        let s = ConfusionScores::from_confusion(vec![vec![5, 0], vec![5, 0]]).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert_eq!(s.per_class[1].recall, 0.0);
        assert_eq!(s.per_class[1].precision, 0.0);
        assert_eq!(s.per_class[1].f1, 0.0);
        assert_eq!(s.per_class[0].precision, 0.5);
        assert_eq!(s.per_class[0].recall, 1.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        let never = |_: &str| StereotypeLabel::Neutral;
        assert!(evaluate(&never, &[]).is_err());
        assert!(ConfusionScores::from_confusion(vec![vec![0, 0], vec![0, 0]]).is_err());
        assert!(ConfusionScores::from_confusion(vec![vec![1, 0]]).is_err());
    }

    // Second implementation straight from the definitions: walk the example
    // pairs rather than the matrix.
    fn pairwise_oracle(pairs: &[(usize, usize)]) -> (f64, Vec<(f64, f64, f64)>, f64) {
        let n = pairs.len() as f64;
        let acc = pairs.iter().filter(|(g, p)| g == p).count() as f64 / n;
        let mut per = Vec::new();
        let mut weighted_f1 = 0.0;
        for c in 0..4 {
            let tp = pairs.iter().filter(|(g, p)| *g == c && *p == c).count() as f64;
            let fp = pairs.iter().filter(|(g, p)| *g != c && *p == c).count() as f64;
            let fn_ = pairs.iter().filter(|(g, p)| *g == c && *p != c).count() as f64;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
            weighted_f1 += f1 * (tp + fn_) / n;
            per.push((prec, rec, f1));
        }
        (acc, per, weighted_f1)
    }

    #[test]
    fn matches_pairwise_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let pairs: Vec<(usize, usize)> = (0..100)
                .map(|_| {
                    let g = rng.random_range(0..4);
                    let p = if rng.random_bool(0.6) { g } else { rng.random_range(0..4) };
                    (g, p)
                })
                .collect();
            let mut confusion = [[0u64; 4]; 4];
            for (g, p) in &pairs {
                confusion[*g][*p] += 1;
            }
            let m = EvalMetrics::from_confusion(confusion).unwrap();
            let (acc, per, wf1) = pairwise_oracle(&pairs);
            assert!((m.accuracy - acc).abs() < 1e-12);
            for (c, (p, r, f)) in per.iter().enumerate() {
                let s = m.per_label[c].1;
                assert!((s.precision - p).abs() < 1e-12);
                assert!((s.recall - r).abs() < 1e-12);
                assert!((s.f1 - f).abs() < 1e-12);
            }
            assert!((m.weighted_avg.f1 - wf1).abs() < 1e-12);
            // Weighted recall equals accuracy.
            assert!((m.weighted_avg.recall - m.accuracy).abs() < 1e-12);
        }
    }
}
