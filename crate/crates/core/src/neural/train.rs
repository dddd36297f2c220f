//! Mini-batch training loop for the SS-LSTM: Adam with gradient clipping,
//! per-epoch validation metrics, and early stopping on validation macro-F1
//! with best-epoch parameter restore.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, Tape, Tensor, Var};
use crate::corpus::{SentimentLabel, Tweet};
use crate::eval::evaluate;
use crate::scalar::Scalar;

use super::model::{NeuralError, SsLstmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Consecutive non-improving epochs tolerated before stopping; 0 stops
    /// at the first epoch that fails to beat the best validation macro-F1.
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for NeuralTrainConfig {
    fn default() -> Self {
        NeuralTrainConfig {
            lr: 1e-3,
            epochs: 30,
            batch_size: 32,
            clip_norm: 5.0,
            patience: 5,
            seed: 42,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl NeuralTrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(NeuralError::BadConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::BadConfig("batch_size must be >= 1".into()));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(NeuralError::BadConfig(format!(
                "clip_norm must be positive, got {}",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

/// One epoch's record: mean training loss and validation macro metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralEpoch {
    pub train_loss: f64,
    pub valid_precision: f64,
    pub valid_recall: f64,
    pub valid_macro_f1: f64,
    pub valid_weighted_f1: f64,
}

impl NeuralEpoch {
    /// One line per epoch, fixed precision so identical runs log identical
    /// bytes.
    pub fn log_line(&self, epoch: usize) -> String {
        format!(
            "epoch {:>3}  train_loss {:.6}  valid_precision {:.4}  valid_recall {:.4}  \
             valid_macro_f1 {:.4}  valid_weighted_f1 {:.4}",
            epoch,
            self.train_loss,
            self.valid_precision,
            self.valid_recall,
            self.valid_macro_f1,
            self.valid_weighted_f1
        )
    }
}

pub struct TrainedNeural<S: Scalar> {
    pub model: SsLstmModel<S>,
    pub history: Vec<NeuralEpoch>,
    /// Epoch whose parameters the model ended up with; `None` when there was
    /// no validation set (the model keeps its final-epoch parameters).
    pub best_epoch: Option<usize>,
    pub best_valid_macro_f1: f64,
}

impl<S: Scalar> TrainedNeural<S> {
    /// Validation weighted-F1 at the restored epoch; grid search ranks cells
    /// by this. 0 when nothing was validated (including epochs = 0).
    pub fn selection_score(&self) -> f64 {
        match self.best_epoch {
            Some(e) => self.history[e].valid_weighted_f1,
            None => 0.0,
        }
    }
}

fn labels_of(tweets: &[Tweet]) -> Result<Vec<SentimentLabel>, NeuralError> {
    tweets
        .iter()
        .map(|t| {
            t.label
                .ok_or_else(|| NeuralError::UnlabeledTweet { id: t.id.clone() })
        })
        .collect()
}

/// Train `model` on `train`, scoring each epoch on `valid`. Early stopping
/// triggers after `patience` consecutive epochs without a strictly better
/// validation macro-F1; the parameters from the best epoch are restored
/// before returning. An empty `valid` disables scoring and early stopping.
pub fn train_neural<S: Scalar>(
    mut model: SsLstmModel<S>,
    train: &[Tweet],
    valid: &[Tweet],
    cfg: &NeuralTrainConfig,
) -> Result<TrainedNeural<S>, NeuralError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let train_gold = labels_of(train)?;
    let valid_gold = labels_of(valid)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt: Optimizer<S> = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history: Vec<NeuralEpoch> = Vec::new();
    let mut best_epoch: Option<usize> = None;
    let mut best_macro_f1 = f64::NEG_INFINITY;
    let mut best_params: Option<Vec<Tensor<S>>> = None;
    let mut since_improve = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape: Tape<S> = Tape::new();
            let placed = model.place(&mut tape, &model.store);
            let pad_to = batch
                .iter()
                .map(|&i| train[i].tokens.len())
                .max()
                .expect("batch is non-empty");
            let losses: Vec<Var> = batch
                .iter()
                .map(|&i| {
                    let texts: Vec<&str> =
                        train[i].tokens.iter().map(|t| t.text.as_str()).collect();
                    let probs =
                        model.forward_on_tape(&mut tape, &placed, &texts, pad_to, false, false);
                    tape.cross_entropy(probs, train_gold[i].index())
                })
                .collect();
            let loss = tape.mean_n(&losses);
            tape.backward(loss);
            model.store.zero_grads();
            model.store.absorb_grads(&tape);
            model.store.clip_grads(S::c(cfg.clip_norm));
            opt.step(&mut model.store);
            loss_sum += tape.value(loss).item().to_f64_c() * batch.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;

        let record = if valid.is_empty() {
            NeuralEpoch {
                train_loss,
                valid_precision: 0.0,
                valid_recall: 0.0,
                valid_macro_f1: 0.0,
                valid_weighted_f1: 0.0,
            }
        } else {
            let preds = model.predict_batch(valid);
            let m = evaluate(&preds, &valid_gold).expect("parallel lists of equal length");
            NeuralEpoch {
                train_loss,
                valid_precision: m.macro_precision,
                valid_recall: m.macro_recall,
                valid_macro_f1: m.macro_f1,
                valid_weighted_f1: m.weighted_f1,
            }
        };
        history.push(record);

        if !valid.is_empty() {
            if record.valid_macro_f1 > best_macro_f1 {
                best_macro_f1 = record.valid_macro_f1;
                best_epoch = Some(epoch);
                best_params = Some(model.store.snapshot());
                since_improve = 0;
            } else {
                since_improve += 1;
                if since_improve > cfg.patience {
                    break;
                }
            }
        }
    }

    if let Some(params) = &best_params {
        model.store.restore(params);
    }
    Ok(TrainedNeural {
        model,
        history,
        best_epoch,
        best_valid_macro_f1: if best_macro_f1.is_finite() { best_macro_f1 } else { 0.0 },
    })
}
