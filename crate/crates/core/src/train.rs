//! Mini-batch training with early stopping on validation AUC.
//!
//! Per-example work inside a batch is split into fixed-size chunks that an
//! [`Executor`] may run in parallel. Chunk results are reduced in chunk order,
//! so the result is bit-identical for any worker count.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, EmbeddingRecord, Split};
use crate::fusion::FusionConfig;
use crate::metrics::{self, MetricError};
use crate::model::{self, Gradients, Model, ModelError};
use crate::neural::{self, NeuralError, Prediction};
use crate::optim::{AdamHyper, Optimizer, OptimizerKind};

/// Examples per executor task.
pub const CHUNK: usize = 8;

/// Runs `n` independent tasks and returns their results in index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Hidden layer widths of the MLP head.
    pub hidden: Vec<usize>,
    /// Decision threshold for logged accuracies.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            hidden: alloc::vec![768],
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field| Err(TrainError::Config(field));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs");
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return bad("patience");
        }
        if self.hidden.contains(&0) {
            return bad("hidden");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-example loss accumulated over the epoch's batches.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub train_auc_roc: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_auc_roc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_auc_roc: f64,
}

/// Predictions for `records`, computed in executor chunks.
pub fn predict_all<E: Executor>(
    model: &Model,
    records: &[&EmbeddingRecord],
    threshold: f64,
    exec: &E,
) -> Result<Vec<Prediction>, ModelError> {
    let chunks: Vec<&[&EmbeddingRecord]> = records.chunks(CHUNK).collect();
    let parts = exec.map(chunks.len(), |c| {
        chunks[c]
            .iter()
            .map(|r| model.predict(r, threshold))
            .collect::<Result<Vec<_>, _>>()
    });
    let mut out = Vec::with_capacity(records.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

fn labels_of(records: &[&EmbeddingRecord]) -> Result<Vec<u8>, ModelError> {
    records
        .iter()
        .map(|r| r.label.ok_or_else(|| ModelError::MissingLabel { id: r.id.clone() }))
        .collect()
}

struct SplitStats {
    loss: f64,
    accuracy: f64,
    auc_roc: Result<f64, MetricError>,
}

fn split_stats<E: Executor>(
    model: &Model,
    records: &[&EmbeddingRecord],
    labels: &[u8],
    threshold: f64,
    exec: &E,
) -> Result<SplitStats, ModelError> {
    let preds = predict_all(model, records, threshold, exec)?;
    let mut loss = 0.0;
    for (p, &y) in preds.iter().zip(labels) {
        loss += neural::softmax_ce(p.logits, y)?;
    }
    let hats: Vec<u8> = preds.iter().map(|p| p.label_hat).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.p_hat).collect();
    Ok(SplitStats {
        loss: loss / records.len() as f64,
        accuracy: metrics::accuracy(&hats, labels).unwrap_or(0.0),
        auc_roc: metrics::auc_roc(&scores, labels),
    })
}

fn batch_gradients<E: Executor>(
    model: &Model,
    batch: &[&EmbeddingRecord],
    exec: &E,
) -> Result<(f64, Gradients), ModelError> {
    let chunks: Vec<&[&EmbeddingRecord]> = batch.chunks(CHUNK).collect();
    let parts = exec.map(chunks.len(), |c| model::backward(model, chunks[c]));
    let mut total: Option<(f64, Gradients)> = None;
    for part in parts {
        let (loss, grads) = part?;
        match &mut total {
            None => total = Some((loss, grads)),
            Some((l, g)) => {
                *l += loss;
                g.add_assign(&grads);
            }
        }
    }
    Ok(total.unwrap_or_else(|| (0.0, Gradients::zeros_like(model))))
}

/// Non-finite logits mean the parameters (or inputs) have blown up.
fn divergence_or(err: ModelError, diverged: &TrainError) -> TrainError {
    match err {
        ModelError::Neural(NeuralError::NonFinite(_)) => diverged.clone(),
        other => other.into(),
    }
}

/// Trains on the dataset's train split, early-stopping on its val split.
pub fn train(dataset: &Dataset, fusion: &FusionConfig, cfg: &TrainConfig) -> Result<(Model, TrainLog), TrainError> {
    train_with(
        &dataset.split(Split::Train),
        &dataset.split(Split::Val),
        fusion,
        cfg,
        &Sequential,
    )
}

/// Trains from an explicit split pair with a caller-supplied executor.
///
/// Returns the parameters of the epoch with the highest validation AUC
/// (earliest on ties).
pub fn train_with<E: Executor>(
    train: &[&EmbeddingRecord],
    val: &[&EmbeddingRecord],
    fusion: &FusionConfig,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<(Model, TrainLog), TrainError> {
    cfg.validate()?;
    fusion.validate().map_err(ModelError::from)?;
    if train.is_empty() {
        return Err(TrainError::Config("train split is empty"));
    }
    if val.is_empty() {
        return Err(TrainError::Config("val split is empty"));
    }
    let train_labels = labels_of(train)?;
    let val_labels = labels_of(val)?;
    if !(val_labels.contains(&0) && val_labels.contains(&1)) {
        return Err(TrainError::Config("val split needs both classes"));
    }

    let mut model = Model::init(*fusion, &cfg.hidden, cfg.seed)?;
    let mut optimizer = Optimizer::new(
        cfg.optimizer,
        cfg.learning_rate,
        AdamHyper {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        },
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(Model, usize, f64)> = None;
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&EmbeddingRecord> = idx.iter().map(|&i| train[i]).collect();
            let diverged = TrainError::Divergence {
                epoch,
                batch: batch_idx,
            };
            let (loss, grads) = batch_gradients(&model, &batch, exec).map_err(|e| divergence_or(e, &diverged))?;
            if !loss.is_finite() {
                return Err(diverged);
            }
            epoch_loss += loss;
            optimizer.step(&mut model.param_slices_mut(), &grads.slices());
        }

        let diverged = TrainError::Divergence {
            epoch,
            batch: train.len().div_ceil(cfg.batch_size) - 1,
        };
        let tr =
            split_stats(&model, train, &train_labels, cfg.threshold, exec).map_err(|e| divergence_or(e, &diverged))?;
        let va = split_stats(&model, val, &val_labels, cfg.threshold, exec).map_err(|e| divergence_or(e, &diverged))?;
        let val_auc = va.auc_roc.expect("val split has both classes");
        epochs.push(EpochLog {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            train_accuracy: tr.accuracy,
            train_auc_roc: tr.auc_roc.ok(),
            val_loss: va.loss,
            val_accuracy: va.accuracy,
            val_auc_roc: val_auc,
        });

        let improved = best.as_ref().is_none_or(|(_, _, auc)| val_auc > *auc);
        if improved {
            best = Some((model.clone(), epoch, val_auc));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (model, best_epoch, best_val_auc_roc) = best.expect("at least one epoch ran");
    Ok((
        model,
        TrainLog {
            epochs,
            best_epoch,
            best_val_auc_roc,
        },
    ))
}
