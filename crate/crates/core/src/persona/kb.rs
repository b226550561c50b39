//! Curated passages and lexical TF-IDF retrieval.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::features::tokenize;
use crate::error::{Error, Result};
use crate::label::Theme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    pub theme: Theme,
}

/// One entry of `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub theme: Theme,
    /// Defaults to the file stem.
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Index {
    idf: HashMap<String, f64>,
    /// Per passage: L2-normalized TF-IDF weights.
    vectors: Vec<HashMap<String, f64>>,
}

/// Passages with a retrieval index built on construction. Immutable after
/// load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    passages: Vec<Passage>,
    index: Index,
}

fn term_counts(text: &str) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for t in tokenize(text) {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

fn normalized(weights: impl Iterator<Item = (String, f64)>) -> HashMap<String, f64> {
    let v: HashMap<String, f64> = weights.filter(|(_, w)| *w > 0.0).collect();
    let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    v.into_iter().map(|(t, w)| (t, w / norm)).collect()
}

impl KnowledgeBase {
    pub fn new(mut passages: Vec<Passage>) -> Result<Self> {
        passages.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = passages.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::invalid(format!("duplicate passage id {}", w[0].id)));
        }
        let counts: Vec<BTreeMap<String, f64>> = passages.iter().map(|p| term_counts(&p.text)).collect();
        let n = passages.len() as f64;
        let mut df: HashMap<String, f64> = HashMap::new();
        for c in &counts {
            for t in c.keys() {
                *df.entry(t.clone()).or_insert(0.0) += 1.0;
            }
        }
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d)).ln() + 1.0))
            .collect();
        let vectors = counts
            .into_iter()
            .map(|c| normalized(c.into_iter().map(|(t, tf)| {
                let w = tf * idf[&t];
                (t, w)
            })))
            .collect();
        Ok(KnowledgeBase {
            passages,
            index: Index { idf, vectors },
        })
    }

    /// Loads every passage listed in `dir/manifest.json`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Vec<ManifestEntry> =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut passages = Vec::with_capacity(manifest.len());
        for entry in manifest {
            let path = dir.join(&entry.file);
            let text = std::fs::read_to_string(&path)?.trim().to_string();
            let id = entry.id.unwrap_or_else(|| {
                Path::new(&entry.file)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or(entry.file.clone())
            });
            passages.push(Passage {
                id,
                text,
                theme: entry.theme,
            });
        }
        Self::new(passages)
    }

    /// Passages sorted by id.
    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.passages
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.passages[i])
    }

    fn query_vector(&self, query: &str) -> HashMap<String, f64> {
        normalized(term_counts(query).into_iter().filter_map(|(t, tf)| {
            let idf = *self.index.idf.get(&t)?;
            Some((t, tf * idf))
        }))
    }

    /// Cosine similarity between `query` and every passage, in id order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q = self.query_vector(query);
        self.index
            .vectors
            .iter()
            .map(|v| q.iter().map(|(t, w)| w * v.get(t).copied().unwrap_or(0.0)).sum())
            .collect()
    }

    /// Top `k` passages by cosine similarity, ties by ascending id.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<(&Passage, f64)> {
        self.ranked(query, k, |_| true)
    }

    /// As [`retrieve`](Self::retrieve), restricted to one theme.
    pub fn retrieve_theme(&self, query: &str, theme: Theme, k: usize) -> Vec<(&Passage, f64)> {
        self.ranked(query, k, |p| p.theme == theme)
    }

    fn ranked(&self, query: &str, k: usize, keep: impl Fn(&Passage) -> bool) -> Vec<(&Passage, f64)> {
        let scores = self.scores(query);
        let mut ranked: Vec<(&Passage, f64)> = self
            .passages
            .iter()
            .zip(scores)
            .filter(|(p, _)| keep(p))
            .collect();
        // Stable sort keeps id order among equal scores.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(k);
        ranked
    }
}
