//! Fleiss' kappa over a fixed number of annotators per item.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agreement below this is refused by the seed-annotation gate.
pub const SUBSTANTIAL_AGREEMENT: f64 = 0.6;

/// Per-item category counts. Every row sums to the same number of
/// annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationMatrix {
    pub categories: Vec<String>,
    pub items: Vec<AnnotatedItem>,
    pub annotators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedItem {
    pub sentence: String,
    pub counts: Vec<usize>,
}

impl AnnotationMatrix {
    pub fn new(categories: Vec<String>, items: Vec<AnnotatedItem>) -> Result<Self> {
        if categories.len() < 2 {
            return Err(Error::invalid("need at least two categories"));
        }
        let first = items.first().ok_or_else(|| Error::invalid("no annotated items"))?;
        let annotators: usize = first.counts.iter().sum();
        if annotators < 2 {
            return Err(Error::invalid("need at least two annotators per item"));
        }
        for (i, item) in items.iter().enumerate() {
            if item.counts.len() != categories.len() {
                return Err(Error::invalid(format!(
                    "item {i} has {} counts for {} categories",
                    item.counts.len(),
                    categories.len()
                )));
            }
            let n: usize = item.counts.iter().sum();
            if n != annotators {
                return Err(Error::invalid(format!(
                    "item {i} has {n} annotations, expected {annotators}"
                )));
            }
        }
        Ok(AnnotationMatrix { categories, items, annotators })
    }

    /// Builds the matrix from one row per item holding each annotator's
    /// category.
    pub fn from_labels(categories: Vec<String>, rows: &[(String, Vec<String>)]) -> Result<Self> {
        let items = rows
            .iter()
            .map(|(sentence, labels)| {
                let mut counts = vec![0; categories.len()];
                for l in labels {
                    let idx = categories
                        .iter()
                        .position(|c| c == l.trim())
                        .ok_or_else(|| Error::invalid(format!("unknown category {l:?}")))?;
                    counts[idx] += 1;
                }
                Ok(AnnotatedItem { sentence: sentence.clone(), counts })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(categories, items)
    }

    /// Reads delimited text: a `sentence` column followed by one column per
    /// annotator, each cell holding a category name.
    pub fn read_delimited<R: Read>(input: R, delimiter: u8) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(input);
        let mut rows = Vec::new();
        let mut categories: Vec<String> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut fields = record.iter();
            let sentence = fields.next().unwrap_or_default().to_string();
            let labels: Vec<String> = fields.map(|f| f.trim().to_string()).collect();
            for l in &labels {
                if !categories.contains(l) {
                    categories.push(l.clone());
                }
            }
            rows.push((sentence, labels));
        }
        categories.sort();
        if categories.len() == 1 {
            categories.push("(other)".into());
        }
        Self::from_labels(categories, &rows)
    }
}

/// Fleiss' kappa. Perfect agreement returns exactly 1.0; all annotations in
/// one category leaves the statistic undefined.
pub fn fleiss_kappa(m: &AnnotationMatrix) -> Result<f64> {
    let n = m.annotators as f64;
    let items = m.items.len() as f64;
    let k = m.categories.len();

    let mut column_totals = vec![0.0; k];
    let mut p_bar = 0.0;
    for item in &m.items {
        let mut agree = 0.0;
        for (j, &c) in item.counts.iter().enumerate() {
            let c = c as f64;
            column_totals[j] += c;
            agree += c * (c - 1.0);
        }
        p_bar += agree / (n * (n - 1.0));
    }
    p_bar /= items;
    let p_e: f64 = column_totals.iter().map(|t| (t / (items * n)).powi(2)).sum();

    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::degenerate("all annotations fall in one category"));
    }
    if (p_bar - 1.0).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Refuses a seed set whose agreement is below
/// [`SUBSTANTIAL_AGREEMENT`] unless `allow_low_agreement` is set.
pub fn annotation_gate(m: &AnnotationMatrix, allow_low_agreement: bool) -> Result<f64> {
    let kappa = fleiss_kappa(m)?;
    if kappa < SUBSTANTIAL_AGREEMENT {
        if allow_low_agreement {
            log::warn!("seed agreement kappa={kappa:.3} is below {SUBSTANTIAL_AGREEMENT}; override set");
        } else {
            return Err(Error::invalid(format!(
                "seed agreement kappa={kappa:.3} is below {SUBSTANTIAL_AGREEMENT}"
            )));
        }
    }
    Ok(kappa)
}
