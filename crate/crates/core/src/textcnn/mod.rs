//! One-layer convolutional text classifier with hand-written gradients.
//!
//! Architecture: token embeddings → valid 1-D convolutions (one bank per
//! filter size) → ReLU → max over time → inverted dropout → affine → softmax
//! over (violation, non_violation).
//!
//! Sequences are zero-padded to `max_len`, but a window lying entirely in
//! the padding always evaluates to its filter's bias. So only windows that
//! start inside the text are computed; the padding windows contribute one
//! extra candidate equal to the bias. Because padding positions come after
//! every text position, "first argmax" semantics are unchanged.

mod train;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::embeddings::{sequence_matrix, EmbeddingKind, EmbeddingTable, SequenceMatrix, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

pub use train::{train, train_with_monitor, Adam, EarlyStopping, EpochRecord, StopDecision, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Embeddings initialised in [−0.05, 0.05] over the training vocabulary
    /// and trained with the rest of the network.
    LearnedFromVocab,
    /// Rows come from a pre-trained table and are never updated.
    PretrainedFrozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextCnnConfig {
    pub emb_dim: usize,
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub max_len: usize,
    pub embedding_mode: EmbeddingMode,
    pub seed: u64,
}

impl Default for TextCnnConfig {
    fn default() -> Self {
        TextCnnConfig {
            emb_dim: 200,
            filter_sizes: vec![3, 4, 5],
            filters_per_size: 100,
            dropout_p: 0.25,
            learning_rate: 0.001,
            batch_size: 16,
            max_epochs: 100,
            patience: 8,
            max_len: DEFAULT_MAX_LEN,
            embedding_mode: EmbeddingMode::LearnedFromVocab,
            seed: rng::DEFAULT_SEED,
        }
    }
}

impl TextCnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.emb_dim == 0 || self.filters_per_size == 0 || self.filter_sizes.is_empty() {
            return bad("emb_dim, filters_per_size and filter_sizes must be non-empty".into());
        }
        if let Some(&s) = self.filter_sizes.iter().find(|&&s| s == 0 || s > self.max_len) {
            return bad(format!("filter size {s} must lie in 1..={}", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p must be in [0, 1), got {}", self.dropout_p));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("learning_rate, batch_size, max_epochs and patience must be positive".into());
        }
        Ok(())
    }

    pub fn total_filters(&self) -> usize {
        self.filter_sizes.len() * self.filters_per_size
    }

    /// Length of each convolution output before pooling.
    pub fn conv_output_lengths(&self) -> Vec<usize> {
        self.filter_sizes.iter().map(|s| self.max_len - s + 1).collect()
    }
}

/// Identifies the pre-trained table a frozen model must be paired with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    pub name: String,
    pub kind: EmbeddingKind,
    pub dim: usize,
}

impl EmbeddingRef {
    pub fn of(table: &EmbeddingTable) -> Self {
        EmbeddingRef {
            name: table.name().to_string(),
            kind: table.kind(),
            dim: table.dim(),
        }
    }
}

/// All trainable parameters. Convolution kernels are stored per filter
/// size as `[filter][offset][emb]`; the output layer as `[class][feature]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// `vocab × emb_dim`; empty for frozen embeddings.
    pub embedding: Vec<f64>,
    pub conv_weights: Vec<Vec<f64>>,
    pub conv_biases: Vec<Vec<f64>>,
    pub fc_weights: Vec<f64>,
    pub fc_biases: Vec<f64>,
}

impl Params {
    pub fn zeros_like(other: &Params) -> Params {
        Params {
            embedding: vec![0.0; other.embedding.len()],
            conv_weights: other.conv_weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            conv_biases: other.conv_biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            fc_weights: vec![0.0; other.fc_weights.len()],
            fc_biases: vec![0.0; other.fc_biases.len()],
        }
    }

    /// Every parameter array in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice()];
        for (w, b) in self.conv_weights.iter().zip(&self.conv_biases) {
            out.push(w);
            out.push(b);
        }
        out.push(&self.fc_weights);
        out.push(&self.fc_biases);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.as_mut_slice()];
        for (w, b) in self.conv_weights.iter_mut().zip(self.conv_biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.fc_weights);
        out.push(&mut self.fc_biases);
        out
    }

    pub fn count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// A document ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub enum CnnInput {
    /// Vocabulary ids (None for out-of-vocabulary tokens) looked up in the
    /// model's own embedding matrix.
    Ids(Vec<Option<usize>>),
    /// Rows taken from a pre-trained table.
    Rows(SequenceMatrix),
}

impl CnnInput {
    fn true_length(&self) -> usize {
        match self {
            CnnInput::Ids(ids) => ids.len(),
            CnnInput::Rows(seq) => seq.true_length(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnModel {
    pub config: TextCnnConfig,
    /// Token → embedding row, learned mode only.
    pub vocab: BTreeMap<String, usize>,
    /// The table a frozen model was trained with.
    pub embedding_ref: Option<EmbeddingRef>,
    pub params: Params,
}

/// What the forward pass remembers for the backward pass.
struct Trace {
    /// Per pooled feature: the maximal pre-activation and where it was
    /// found (None = a padding window).
    best: Vec<f64>,
    argmax: Vec<Option<usize>>,
    /// Pooled features after ReLU and dropout.
    hidden: Vec<f64>,
    probs: [f64; 2],
}

/// Violation for `p[0] >= p[1]`; class 0 is violation.
pub fn predict_cnn(probs: [f64; 2]) -> Label {
    if probs[0] >= probs[1] {
        Label::Violation
    } else {
        Label::NonViolation
    }
}

/// Cross-entropy `−ln p(true)` with the probability clamped at 1e-12.
pub fn loss(probs: [f64; 2], label: Label) -> f64 {
    -probs[label.index()].max(1e-12).ln()
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TextCnnModel {
    /// Fresh parameters drawn from `rng`: embeddings U[−0.05, 0.05], kernels
    /// and output weights U[−1/√fan_in, 1/√fan_in], biases zero.
    pub fn init(
        config: TextCnnConfig,
        vocab: BTreeMap<String, usize>,
        embedding_ref: Option<EmbeddingRef>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.validate()?;
        let e = config.emb_dim;
        let embedding = match config.embedding_mode {
            EmbeddingMode::LearnedFromVocab => (0..vocab.len() * e).map(|_| rng.random_range(-0.05..=0.05)).collect(),
            EmbeddingMode::PretrainedFrozen => {
                let r = embedding_ref
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("frozen mode needs an embedding table".into()))?;
                if r.dim != e {
                    return Err(Error::DimensionMismatch {
                        expected: e,
                        actual: r.dim,
                    });
                }
                Vec::new()
            }
        };
        let f = config.filters_per_size;
        let mut conv_weights = Vec::new();
        let mut conv_biases = Vec::new();
        for &s in &config.filter_sizes {
            let a = 1.0 / ((s * e) as f64).sqrt();
            conv_weights.push((0..f * s * e).map(|_| rng.random_range(-a..=a)).collect());
            conv_biases.push(vec![0.0; f]);
        }
        let t = config.total_filters();
        let a = 1.0 / (t as f64).sqrt();
        let fc_weights = (0..2 * t).map(|_| rng.random_range(-a..=a)).collect();
        Ok(TextCnnModel {
            config,
            vocab,
            embedding_ref,
            params: Params {
                embedding,
                conv_weights,
                conv_biases,
                fc_weights,
                fc_biases: vec![0.0; 2],
            },
        })
    }

    /// Turns tokens into network input. Learned models look tokens up in
    /// their vocabulary; frozen models need the table they were trained on.
    pub fn prepare<S: AsRef<str>>(&self, tokens: &[S], table: Option<&EmbeddingTable>) -> Result<CnnInput> {
        let max_len = self.config.max_len;
        match self.config.embedding_mode {
            EmbeddingMode::LearnedFromVocab => Ok(CnnInput::Ids(
                tokens
                    .iter()
                    .take(max_len)
                    .map(|t| self.vocab.get(t.as_ref()).copied())
                    .collect(),
            )),
            EmbeddingMode::PretrainedFrozen => {
                let table = table.ok_or_else(|| {
                    Error::InvalidArgument("frozen TextCNN needs its embedding table".into())
                })?;
                if table.dim() != self.config.emb_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.emb_dim,
                        actual: table.dim(),
                    });
                }
                Ok(CnnInput::Rows(sequence_matrix(tokens, table, max_len)))
            }
        }
    }

    /// The padded embedding matrix the network sees for `tokens`.
    pub fn sequence<S: AsRef<str>>(&self, tokens: &[S], table: Option<&EmbeddingTable>) -> Result<SequenceMatrix> {
        match self.prepare(tokens, table)? {
            CnnInput::Rows(seq) => Ok(seq),
            CnnInput::Ids(ids) => {
                let e = self.config.emb_dim;
                let rows = ids
                    .iter()
                    .map(|id| match id {
                        Some(i) => self.params.embedding[i * e..(i + 1) * e].to_vec(),
                        None => vec![0.0; e],
                    })
                    .collect();
                SequenceMatrix::from_rows(e, self.config.max_len, rows)
            }
        }
    }

    fn row<'a>(&'a self, input: &'a CnnInput, i: usize) -> Option<&'a [f64]> {
        let e = self.config.emb_dim;
        match input {
            CnnInput::Ids(ids) => ids[i].map(|id| &self.params.embedding[id * e..(id + 1) * e]),
            CnnInput::Rows(seq) => seq.row(i),
        }
    }

    fn check_input(&self, input: &CnnInput) -> Result<()> {
        match input {
            CnnInput::Rows(seq) => {
                if seq.dim() != self.config.emb_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.emb_dim,
                        actual: seq.dim(),
                    });
                }
                if seq.max_len() != self.config.max_len {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.max_len,
                        actual: seq.max_len(),
                    });
                }
            }
            CnnInput::Ids(ids) => {
                if ids.len() > self.config.max_len {
                    return Err(Error::DimensionMismatch {
                        expected: self.config.max_len,
                        actual: ids.len(),
                    });
                }
                let vocab = self.params.embedding.len() / self.config.emb_dim;
                if ids.iter().flatten().any(|&i| i >= vocab) {
                    return Err(Error::InvalidArgument("token id outside the vocabulary".into()));
                }
            }
        }
        Ok(())
    }

    fn run(&self, input: &CnnInput, mask: Option<&[f64]>) -> Trace {
        let cfg = &self.config;
        let e = cfg.emb_dim;
        let nf = cfg.filters_per_size;
        let len = input.true_length();
        let rows: Vec<Option<&[f64]>> = (0..len).map(|i| self.row(input, i)).collect();
        let total = cfg.total_filters();
        let mut best = Vec::with_capacity(total);
        let mut argmax = Vec::with_capacity(total);

        for (k, &s) in cfg.filter_sizes.iter().enumerate() {
            let positions = cfg.max_len - s + 1;
            let text_positions = positions.min(len);
            let has_padding_window = positions > len;
            let w = &self.params.conv_weights[k];
            let b = &self.params.conv_biases[k];
            for f in 0..nf {
                let kernel = &w[f * s * e..(f + 1) * s * e];
                let mut top = f64::NEG_INFINITY;
                let mut at = None;
                for p in 0..text_positions {
                    let mut z = b[f];
                    for r in 0..s.min(len - p) {
                        if let Some(x) = rows[p + r] {
                            z += dot(&kernel[r * e..(r + 1) * e], x);
                        }
                    }
                    if z > top {
                        top = z;
                        at = Some(p);
                    }
                }
                if has_padding_window && b[f] > top {
                    top = b[f];
                    at = None;
                }
                best.push(top);
                argmax.push(at);
            }
        }

        let hidden: Vec<f64> = best
            .iter()
            .enumerate()
            .map(|(j, &z)| z.max(0.0) * mask.map_or(1.0, |m| m[j]))
            .collect();
        let fc = &self.params.fc_weights;
        let logits = [
            self.params.fc_biases[0] + dot(&fc[..total], &hidden),
            self.params.fc_biases[1] + dot(&fc[total..], &hidden),
        ];
        Trace {
            best,
            argmax,
            hidden,
            probs: softmax(logits),
        }
    }

    /// Class probabilities `(violation, non_violation)` for a padded
    /// sequence. With `training` set, dropout masks are drawn from `seed`.
    pub fn forward(&self, seq: &SequenceMatrix, training: bool, seed: u64) -> Result<[f64; 2]> {
        let input = CnnInput::Rows(seq.clone());
        self.check_input(&input)?;
        let mask = training.then(|| self.dropout_mask(&mut rng::seeded(seed)));
        Ok(self.run(&input, mask.as_deref()).probs)
    }

    /// Inference-mode probabilities for prepared input.
    pub fn probabilities(&self, input: &CnnInput) -> Result<[f64; 2]> {
        self.check_input(input)?;
        Ok(self.run(input, None).probs)
    }

    pub fn predict_input(&self, input: &CnnInput) -> Result<Label> {
        self.probabilities(input).map(predict_cnn)
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S], table: Option<&EmbeddingTable>) -> Result<(Label, [f64; 2])> {
        let p = self.probabilities(&self.prepare(tokens, table)?)?;
        Ok((predict_cnn(p), p))
    }

    /// Inverted-dropout mask: 0 with probability p, else 1/(1−p).
    pub fn dropout_mask(&self, rng: &mut SeededRng) -> Vec<f64> {
        let p = self.config.dropout_p;
        let keep = 1.0 / (1.0 - p);
        (0..self.config.total_filters())
            .map(|_| if p > 0.0 && rng.random::<f64>() < p { 0.0 } else { keep })
            .collect()
    }

    /// Mean loss over `batch` and its exact gradient. `masks`, when given,
    /// holds one dropout mask per item.
    pub fn loss_and_gradient(
        &self,
        batch: &[(CnnInput, Label)],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<(f64, Params)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let cfg = &self.config;
        let e = cfg.emb_dim;
        let nf = cfg.filters_per_size;
        let total = cfg.total_filters();
        let learned = cfg.embedding_mode == EmbeddingMode::LearnedFromVocab;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = Params::zeros_like(&self.params);
        let mut total_loss = 0.0;

        for (item, (input, label)) in batch.iter().enumerate() {
            self.check_input(input)?;
            let mask = masks.map(|m| m[item].as_slice());
            let trace = self.run(input, mask);
            total_loss += loss(trace.probs, *label);

            let y = label.index();
            let dlogit = [
                (trace.probs[0] - if y == 0 { 1.0 } else { 0.0 }) * scale,
                (trace.probs[1] - if y == 1 { 1.0 } else { 0.0 }) * scale,
            ];
            for c in 0..2 {
                grad.fc_biases[c] += dlogit[c];
                for (g, h) in grad.fc_weights[c * total..(c + 1) * total].iter_mut().zip(&trace.hidden) {
                    *g += dlogit[c] * h;
                }
            }

            let len = input.true_length();
            let mut j = 0;
            for (k, &s) in cfg.filter_sizes.iter().enumerate() {
                let w = &self.params.conv_weights[k];
                for f in 0..nf {
                    let jj = j;
                    j += 1;
                    // ReLU passes gradient only for strictly positive input
                    if trace.best[jj] <= 0.0 {
                        continue;
                    }
                    let dh = self.params.fc_weights[jj] * dlogit[0] + self.params.fc_weights[total + jj] * dlogit[1];
                    let dz = dh * mask.map_or(1.0, |m| m[jj]);
                    if dz == 0.0 {
                        continue;
                    }
                    grad.conv_biases[k][f] += dz;
                    let Some(p) = trace.argmax[jj] else {
                        continue;
                    };
                    let base = f * s * e;
                    for r in 0..s.min(len - p) {
                        let Some(x) = self.row(input, p + r) else {
                            continue;
                        };
                        let gk = &mut grad.conv_weights[k][base + r * e..base + (r + 1) * e];
                        for (g, xv) in gk.iter_mut().zip(x) {
                            *g += dz * xv;
                        }
                        if learned {
                            if let CnnInput::Ids(ids) = input {
                                if let Some(id) = ids[p + r] {
                                    let kernel = &w[base + r * e..base + (r + 1) * e];
                                    for (g, wv) in grad.embedding[id * e..(id + 1) * e].iter_mut().zip(kernel) {
                                        *g += dz * wv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((total_loss * scale, grad))
    }

    /// Mean inference-mode loss, without gradients.
    pub fn mean_loss(&self, batch: &[(CnnInput, Label)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut sum = 0.0;
        for (input, label) in batch {
            sum += loss(self.probabilities(input)?, *label);
        }
        Ok(sum / batch.len() as f64)
    }
}
