//! Mini-batch training of [`LinearModel`] with cross-entropy loss and
//! AdamW updates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{check_dim, featurize, SparseVector, DEFAULT_FEATURE_DIM};
use super::model::{softmax_unchecked, LinearModel};
use crate::error::{Error, Result};
use crate::label::{LabeledExample, StereotypeLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub early_stopping: bool,
    /// Epochs without validation improvement before training stops.
    pub patience: usize,
    pub rng_seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 16,
            epochs: 3,
            learning_rate: 1e-2,
            weight_decay: 1e-4,
            early_stopping: true,
            patience: 2,
            rng_seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        Ok(())
    }
}

/// Identity and feature hashing of the model being trained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub id: String,
    pub feature_seed: u64,
    pub feature_dim: usize,
}

impl ModelSpec {
    pub fn new(id: impl Into<String>, feature_seed: u64) -> Self {
        ModelSpec {
            id: id.into(),
            feature_seed,
            feature_dim: DEFAULT_FEATURE_DIM,
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.feature_dim = dim;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub history: Vec<EpochStats>,
    /// Epoch whose snapshot was returned (1-based).
    pub selected_epoch: usize,
    pub validation_size: usize,
}

/// A featurized training row.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub x: SparseVector,
    pub y: StereotypeLabel,
}

pub fn encode(examples: &[LabeledExample], seed: u64, dim: usize) -> Result<Vec<Encoded>> {
    examples
        .iter()
        .map(|e| {
            Ok(Encoded {
                x: featurize(&e.text, seed, dim)?,
                y: e.label,
            })
        })
        .collect()
}

/// Gradient of the mean cross-entropy, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: [f64; 4],
}

/// Mean cross-entropy loss over `batch`.
pub fn loss(model: &LinearModel, batch: &[Encoded]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|e| {
            let p = softmax_unchecked(&model.logits_for(&e.x));
            -p[e.y.index()].max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    total / batch.len() as f64
}

/// Mean cross-entropy loss and its analytic gradient.
pub fn loss_and_gradient(model: &LinearModel, batch: &[Encoded]) -> (f64, Gradient) {
    let d = model.feature_dim;
    let mut grad = Gradient {
        weights: vec![0.0; model.weights.len()],
        bias: [0.0; 4],
    };
    if batch.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for e in batch {
        let p = softmax_unchecked(&model.logits_for(&e.x));
        total -= p[e.y.index()].max(f64::MIN_POSITIVE).ln();
        for (r, pr) in p.iter().enumerate() {
            let delta = (pr - if r == e.y.index() { 1.0 } else { 0.0 }) * scale;
            grad.bias[r] += delta;
            for (b, v) in e.x.entries() {
                grad.weights[r * d + *b as usize] += delta * v;
            }
        }
    }
    (total * scale, grad)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    m_bias: [f64; 4],
    v_bias: [f64; 4],
    step: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            m_bias: [0.0; 4],
            v_bias: [0.0; 4],
            step: 0,
        }
    }

    /// Decoupled weight decay is applied to the weight matrix only.
    fn update(&mut self, model: &mut LinearModel, grad: &Gradient, cfg: &TrainingConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let lr = cfg.learning_rate;
        let decay = 1.0 - lr * cfg.weight_decay;
        let adam = |w: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        };
        for (((w, g), m), v) in model
            .weights
            .iter_mut()
            .zip(&grad.weights)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *w *= decay;
            adam(w, *g, m, v);
        }
        for r in 0..4 {
            adam(&mut model.bias[r], grad.bias[r], &mut self.m_bias[r], &mut self.v_bias[r]);
        }
    }
}

/// Trains a model. With early stopping on, the snapshot with the lowest
/// validation loss is returned. An empty `validation` set is replaced by the
/// last 10% of the shuffled training data.
pub fn train(
    spec: &ModelSpec,
    train: &[LabeledExample],
    validation: &[LabeledExample],
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dim(spec.feature_dim)?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut train_rows = encode(train, spec.feature_seed, spec.feature_dim)?;
    let mut val_rows = encode(validation, spec.feature_seed, spec.feature_dim)?;
    if val_rows.is_empty() && cfg.early_stopping && train_rows.len() >= 2 {
        train_rows.shuffle(&mut rng);
        let n_val = (train_rows.len() / 10).max(1);
        val_rows = train_rows.split_off(train_rows.len() - n_val);
    }
    for label in StereotypeLabel::ALL {
        if !train_rows.iter().any(|e| e.y == label) {
            log::warn!("training data for {} has no {label} examples", spec.id);
        }
    }

    let mut model = LinearModel::zeros(spec.id.clone(), spec.feature_seed, spec.feature_dim)?;
    let mut opt = AdamW::new(model.weights.len());
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, LinearModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Encoded> = chunk.iter().map(|&i| train_rows[i].clone()).collect();
            let (_, grad) = loss_and_gradient(&model, &batch);
            opt.update(&mut model, &grad, cfg);
        }
        let train_loss = loss(&model, &train_rows);
        let validation_loss = (!val_rows.is_empty()).then(|| loss(&model, &val_rows));
        history.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
        });
        log::debug!("{} epoch {epoch}: train {train_loss:.5} val {validation_loss:?}", spec.id);

        if let (true, Some(vl)) = (cfg.early_stopping, validation_loss) {
            match &best {
                Some((best_loss, _, _)) if vl >= *best_loss => {
                    since_best += 1;
                    if since_best >= cfg.patience.max(1) {
                        break;
                    }
                }
                _ => {
                    best = Some((vl, epoch, model.clone()));
                    since_best = 0;
                }
            }
        }
    }

    let (model, selected_epoch) = match best {
        Some((_, epoch, snapshot)) => (snapshot, epoch),
        None => (model, history.len()),
    };
    model.validate()?;
    Ok(TrainOutcome {
        model,
        history,
        selected_epoch,
        validation_size: val_rows.len(),
    })
}
