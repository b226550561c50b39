//! Import of nine-category MGSD-style records into the four-label scheme.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{LabeledExample, Provenance, StereotypeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgsdCategory {
    Unrelated,
    StereotypeGender,
    AntiStereotypeGender,
    StereotypeRace,
    AntiStereotypeRace,
    StereotypeProfession,
    AntiStereotypeProfession,
    StereotypeReligion,
    AntiStereotypeReligion,
}

impl MgsdCategory {
    pub const ALL: [MgsdCategory; 9] = [
        MgsdCategory::Unrelated,
        MgsdCategory::StereotypeGender,
        MgsdCategory::AntiStereotypeGender,
        MgsdCategory::StereotypeRace,
        MgsdCategory::AntiStereotypeRace,
        MgsdCategory::StereotypeProfession,
        MgsdCategory::AntiStereotypeProfession,
        MgsdCategory::StereotypeReligion,
        MgsdCategory::AntiStereotypeReligion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MgsdCategory::Unrelated => "unrelated",
            MgsdCategory::StereotypeGender => "stereotype_gender",
            MgsdCategory::AntiStereotypeGender => "anti_stereotype_gender",
            MgsdCategory::StereotypeRace => "stereotype_race",
            MgsdCategory::AntiStereotypeRace => "anti_stereotype_race",
            MgsdCategory::StereotypeProfession => "stereotype_profession",
            MgsdCategory::AntiStereotypeProfession => "anti_stereotype_profession",
            MgsdCategory::StereotypeReligion => "stereotype_religion",
            MgsdCategory::AntiStereotypeReligion => "anti_stereotype_religion",
        }
    }

    /// Target label, or `None` for race and religion categories.
    pub fn simplified(self) -> Option<StereotypeLabel> {
        match self {
            MgsdCategory::StereotypeGender => Some(StereotypeLabel::StereotypeGender),
            MgsdCategory::StereotypeProfession => Some(StereotypeLabel::StereotypeProfession),
            MgsdCategory::Unrelated
            | MgsdCategory::AntiStereotypeGender
            | MgsdCategory::AntiStereotypeProfession => Some(StereotypeLabel::Neutral),
            MgsdCategory::StereotypeRace
            | MgsdCategory::AntiStereotypeRace
            | MgsdCategory::StereotypeReligion
            | MgsdCategory::AntiStereotypeReligion => None,
        }
    }
}

impl fmt::Display for MgsdCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MgsdCategory {
    type Err = Error;

    /// Accepts the snake_case names and their space or hyphen separated
    /// spellings ("anti stereotype gender", "anti-stereotype_gender").
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown MGSD category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MgsdRecord {
    pub text: String,
    pub category: MgsdCategory,
}

/// Maps one record onto the four-label scheme. Race and religion records are
/// dropped.
pub fn simplify_mgsd(rec: &MgsdRecord) -> Result<Option<LabeledExample>> {
    let Some(label) = rec.category.simplified() else {
        log::debug!("drop [{}] {:?}", rec.category, rec.text);
        return Ok(None);
    };
    log::debug!("map [{} -> {label}] {:?}", rec.category, rec.text);
    LabeledExample::new(rec.text.trim(), label, None, Provenance::Imported).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub read: usize,
    pub kept: usize,
    pub dropped: usize,
    pub skipped_empty: usize,
    /// (source category, target label or "dropped") -> count
    pub mapping: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    text: String,
    category: String,
}

/// Reads delimited text with `text` and `category` columns.
pub fn import_mgsd<R: Read>(input: R, delimiter: u8) -> Result<(Vec<LabeledExample>, ImportReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::Headers)
        .from_reader(input);
    let mut out = Vec::new();
    let mut report = ImportReport::default();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        report.read += 1;
        let category: MgsdCategory = row
            .category
            .parse()
            .map_err(|e| Error::invalid(format!("row {}: {e}", i + 1)))?;
        if row.text.trim().is_empty() {
            report.skipped_empty += 1;
            continue;
        }
        let rec = MgsdRecord { text: row.text, category };
        match simplify_mgsd(&rec)? {
            Some(ex) => {
                *report.mapping.entry(format!("{category} -> {}", ex.label)).or_default() += 1;
                report.kept += 1;
                out.push(ex);
            }
            None => {
                *report.mapping.entry(format!("{category} -> dropped")).or_default() += 1;
                report.dropped += 1;
            }
        }
    }
    Ok((out, report))
}
