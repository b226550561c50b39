use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{
    Dataset, LabelCounts, LabeledExample, Split, REFERENCE_TEST_COUNTS, REFERENCE_TEST_SIZE,
    REFERENCE_TRAIN_SIZE,
};

/// Sizes of an assembled corpus next to the sizes reported for the
/// original one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub input_rows: usize,
    pub duplicates_removed: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_counts: LabelCounts,
    pub test_counts: LabelCounts,
    pub reference_train_size: usize,
    pub reference_test_size: usize,
    pub reference_test_counts: LabelCounts,
}

/// Deduplicates by exact text (first occurrence wins, sources in argument
/// order), shuffles under `rng_seed` and splits off `test_fraction` of the
/// rows as the test set.
pub fn assemble(
    imported: &[LabeledExample],
    seeds: &[LabeledExample],
    generated: &[LabeledExample],
    test_fraction: f64,
    rng_seed: u64,
) -> Result<(Dataset, AssemblyReport)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let input_rows = imported.len() + seeds.len() + generated.len();
    let mut seen = HashSet::new();
    let mut rows: Vec<LabeledExample> = imported
        .iter()
        .chain(seeds)
        .chain(generated)
        .filter(|e| seen.insert(e.text.clone()))
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("nothing to assemble"));
    }
    let duplicates_removed = input_rows - rows.len();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let n_test = ((rows.len() as f64) * test_fraction).round() as usize;
    let test = rows.split_off(rows.len() - n_test.min(rows.len()));
    let dataset = Dataset::new(rows, test)?;
    let report = AssemblyReport {
        input_rows,
        duplicates_removed,
        train_size: dataset.train.len(),
        test_size: dataset.test.len(),
        train_counts: dataset.label_counts[&Split::Train],
        test_counts: dataset.label_counts[&Split::Test],
        reference_train_size: REFERENCE_TRAIN_SIZE,
        reference_test_size: REFERENCE_TEST_SIZE,
        reference_test_counts: REFERENCE_TEST_COUNTS,
    };
    Ok((dataset, report))
}
