use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{check_dim, featurize, SparseVector};
use crate::error::{Error, Result};
use crate::label::{ProbDist, StereotypeLabel};

/// Numerically stable softmax over four logits.
pub fn softmax(logits: [f64; 4]) -> Result<ProbDist> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit in {logits:?}")));
    }
    let probs = softmax_unchecked(&logits);
    ProbDist::new(probs)
}

pub(crate) fn softmax_unchecked(logits: &[f64; 4]) -> [f64; 4] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|l| (l - max).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// One ensemble member's output for a sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    pub model_id: String,
    pub label: StereotypeLabel,
    pub dist: ProbDist,
}

impl ModelPrediction {
    /// Builds a prediction whose label is the distribution's argmax.
    pub fn from_dist(model_id: impl Into<String>, dist: ProbDist) -> Self {
        ModelPrediction {
            model_id: model_id.into(),
            label: dist.argmax(),
            dist,
        }
    }
}

/// A per-sentence four-class classifier.
pub trait SentenceClassifier: Send + Sync {
    fn id(&self) -> &str;

    fn predict_dist(&self, sentence: &str) -> ProbDist;

    fn predict(&self, sentence: &str) -> ModelPrediction {
        ModelPrediction::from_dist(self.id(), self.predict_dist(sentence))
    }
}

/// Linear softmax classifier over hashed n-gram features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub id: String,
    /// Row-major `4 x feature_dim`, rows in canonical label order.
    pub weights: Vec<f64>,
    pub bias: [f64; 4],
    pub feature_seed: u64,
    pub feature_dim: usize,
}

const MAGIC: &[u8; 4] = b"PFLM";
const FORMAT_VERSION: u32 = 1;

impl LinearModel {
    pub fn zeros(id: impl Into<String>, feature_seed: u64, feature_dim: usize) -> Result<Self> {
        check_dim(feature_dim)?;
        Ok(LinearModel {
            id: id.into(),
            weights: vec![0.0; 4 * feature_dim],
            bias: [0.0; 4],
            feature_seed,
            feature_dim,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.feature_dim)?;
        if self.weights.len() != 4 * self.feature_dim {
            return Err(Error::invalid(format!(
                "weight matrix has {} entries, expected 4 x {}",
                self.weights.len(),
                self.feature_dim
            )));
        }
        if self.weights.iter().chain(self.bias.iter()).any(|w| !w.is_finite()) {
            return Err(Error::invalid("model contains non-finite weights"));
        }
        Ok(())
    }

    pub fn row(&self, label: StereotypeLabel) -> &[f64] {
        let d = self.feature_dim;
        &self.weights[label.index() * d..(label.index() + 1) * d]
    }

    pub fn features(&self, sentence: &str) -> SparseVector {
        featurize(sentence, self.feature_seed, self.feature_dim)
            .expect("dimension checked at construction")
    }

    pub fn logits_for(&self, x: &SparseVector) -> [f64; 4] {
        let d = self.feature_dim;
        let mut logits = self.bias;
        for (r, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights[r * d..(r + 1) * d];
            *logit += x.entries().iter().map(|(b, v)| row[*b as usize] * v).sum::<f64>();
        }
        logits
    }

    pub fn logits(&self, sentence: &str) -> [f64; 4] {
        self.logits_for(&self.features(sentence))
    }

    /// Label and distribution for one sentence.
    pub fn classify(&self, sentence: &str) -> (StereotypeLabel, ProbDist) {
        let dist = softmax(self.logits(sentence)).expect("finite weights give finite logits");
        (dist.argmax(), dist)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_str(&mut out, &self.id)?;
        out.write_all(&self.feature_seed.to_le_bytes())?;
        out.write_all(&(self.feature_dim as u64).to_le_bytes())?;
        out.write_all(&(StereotypeLabel::COUNT as u32).to_le_bytes())?;
        for label in StereotypeLabel::ALL {
            write_str(&mut out, label.as_str())?;
        }
        let mut buf = Vec::with_capacity(8 * (self.weights.len() + 4));
        for w in self.weights.iter().chain(self.bias.iter()) {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::invalid("not a model file"));
        }
        let version = read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported model version {version}")));
        }
        let id = read_str(&mut input)?;
        let feature_seed = read_u64(&mut input)?;
        let feature_dim = usize::try_from(read_u64(&mut input)?)
            .map_err(|_| Error::invalid("feature dimension overflows"))?;
        check_dim(feature_dim)?;
        let n_labels = read_u32(&mut input)? as usize;
        if n_labels != StereotypeLabel::COUNT {
            return Err(Error::invalid(format!("model has {n_labels} labels, expected 4")));
        }
        for expected in StereotypeLabel::ALL {
            let name = read_str(&mut input)?;
            if name != expected.as_str() {
                return Err(Error::invalid(format!(
                    "label order mismatch: found {name:?}, expected {expected}"
                )));
            }
        }
        let n = 4 * feature_dim + 4;
        let mut raw = vec![0u8; 8 * n];
        input.read_exact(&mut raw)?;
        let mut values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let bias_vec = values.split_off(4 * feature_dim);
        let model = LinearModel {
            id,
            weights: values,
            bias: [bias_vec[0], bias_vec[1], bias_vec[2], bias_vec[3]],
            feature_seed,
            feature_dim,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

impl SentenceClassifier for LinearModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict_dist(&self, sentence: &str) -> ProbDist {
        self.classify(sentence).1
    }
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(input: &mut R) -> Result<String> {
    let len = read_u32(input)? as usize;
    if len > 1 << 16 {
        return Err(Error::invalid("string field too long"));
    }
    let mut b = vec![0u8; len];
    input.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| Error::invalid("string field is not UTF-8"))
}
