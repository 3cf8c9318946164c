//! Mini-batch Adam training with validation-loss early stopping.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CnnInput, EmbeddingMode, EmbeddingRef, Params, TextCnnConfig, TextCnnModel};
use crate::corpus::Label;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::rng;

/// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8 and bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    pub fn new(like: &Params) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Params::zeros_like(like),
            v: Params::zeros_like(like),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let slices = params
            .slices_mut()
            .into_iter()
            .zip(grad.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut());
        for (((p, g), m), v) in slices {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored value has failed to strictly improve for
/// `patience` consecutive epochs. Epochs are numbered from 1.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch (with dropout).
    pub train_loss: f64,
    /// The monitored validation loss.
    pub val_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub early_stopped: bool,
}

pub fn train(
    train: &[(Vec<String>, Label)],
    val: &[(Vec<String>, Label)],
    config: &TextCnnConfig,
    table: Option<&EmbeddingTable>,
) -> Result<(TextCnnModel, TrainHistory)> {
    train_with_monitor(train, val, config, table, |_, loss| loss)
}

/// Like [`train`], but the value fed to early stopping for epoch `e` is
/// `monitor(e, measured_val_loss)`. Used to drive the stopping rule with a
/// fixed schedule.
pub fn train_with_monitor(
    train: &[(Vec<String>, Label)],
    val: &[(Vec<String>, Label)],
    config: &TextCnnConfig,
    table: Option<&EmbeddingTable>,
    mut monitor: impl FnMut(usize, f64) -> f64,
) -> Result<(TextCnnModel, TrainHistory)> {
    config.validate()?;
    let violations = train.iter().filter(|(_, l)| l.is_violation()).count();
    if violations == 0 || violations == train.len() {
        return Err(Error::SingleClass);
    }
    if val.is_empty() {
        return Err(Error::InvalidArgument("TextCNN needs a non-empty validation set".into()));
    }

    let (vocab, embedding_ref) = match config.embedding_mode {
        EmbeddingMode::LearnedFromVocab => {
            let mut vocab = BTreeMap::new();
            for (tokens, _) in train {
                for t in tokens {
                    vocab.entry(t.clone()).or_insert(0);
                }
            }
            for (i, id) in vocab.values_mut().enumerate() {
                *id = i;
            }
            (vocab, None)
        }
        EmbeddingMode::PretrainedFrozen => {
            let table = table.ok_or_else(|| {
                Error::InvalidArgument("frozen TextCNN needs an embedding table".into())
            })?;
            (BTreeMap::new(), Some(EmbeddingRef::of(table)))
        }
    };

    let mut rng = rng::seeded(config.seed);
    let mut model = TextCnnModel::init(config.clone(), vocab, embedding_ref, &mut rng)?;
    let prepare = |set: &[(Vec<String>, Label)], m: &TextCnnModel| -> Result<Vec<(CnnInput, Label)>> {
        set.iter().map(|(t, l)| Ok((m.prepare(t, table)?, *l))).collect()
    };
    let train_inputs = prepare(train, &model)?;
    let val_inputs = prepare(val, &model)?;
    let val_truth: Vec<Label> = val.iter().map(|(_, l)| *l).collect();

    let mut adam = Adam::new(&model.params);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    let mut early_stopped = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(CnnInput, Label)> = chunk.iter().map(|&i| train_inputs[i].clone()).collect();
            let masks: Vec<Vec<f64>> = chunk.iter().map(|_| model.dropout_mask(&mut rng)).collect();
            let (l, grad) = model.loss_and_gradient(&batch, Some(&masks))?;
            adam.step(&mut model.params, &grad, config.learning_rate);
            loss_sum += l;
            batches += 1;
        }
        if !model.params.all_finite() {
            return Err(Error::Validation(format!("TextCNN diverged in epoch {epoch}")));
        }

        let measured = model.mean_loss(&val_inputs)?;
        let preds = val_inputs
            .iter()
            .map(|(x, _)| model.predict_input(x))
            .collect::<Result<Vec<_>>>()?;
        let val_f1 = evaluate(&preds, &val_truth)?.f1;
        let val_loss = monitor(epoch, measured);
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_f1,
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best_params = model.params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                early_stopped = true;
                break;
            }
        }
    }

    let stopped_epoch = epochs.len();
    let best_epoch = stopper.best_epoch();
    if best_epoch > 0 {
        model.params = best_params;
    }
    Ok((
        model,
        TrainHistory {
            epochs,
            stopped_epoch,
            best_epoch,
            early_stopped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_schedule() {
        let mut s = EarlyStopping::new(8);
        let schedule = [1.0, 0.9, 0.95, 0.9, 1.0, 0.91, 0.99, 0.9, 0.92, 0.93, 0.5];
        let mut stopped = None;
        for (i, &v) in schedule.iter().enumerate() {
            if s.observe(i + 1, v) == StopDecision::Stop {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(10));
        assert_eq!(s.best_epoch(), 2);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut p = Params {
            embedding: vec![],
            conv_weights: vec![vec![1.0]],
            conv_biases: vec![vec![0.0]],
            fc_weights: vec![0.0, 0.0],
            fc_biases: vec![0.0, 0.0],
        };
        let mut g = Params::zeros_like(&p);
        g.conv_weights[0][0] = 3.0;
        let mut adam = Adam::new(&p);
        adam.step(&mut p, &g, 0.1);
        assert!((p.conv_weights[0][0] - 0.9).abs() < 1e-7);
        assert_eq!(p.fc_weights, vec![0.0, 0.0]);
    }
}
