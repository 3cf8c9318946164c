//! Linear SVM trained with Pegasos stochastic subgradient steps.
//!
//! The objective is `λ/2 ‖w‖² + (1/n) Σ max(0, 1 − y (w·x + b))` with
//! `λ = 1/(C·n)`. The bias is learned as the weight of a constant feature
//! and is regularized along with `w`. The returned model is the average of
//! the iterates visited during the final epoch, which is much less noisy
//! than the last iterate.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dim, dot, label_from_score, TrainingSet};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    /// Project onto the ball of radius `1/√λ` after each step.
    pub project: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 100,
            project: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearSvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x)?;
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.decision(x).map(label_from_score)
    }
}

pub fn lambda(c: f64, n: usize) -> f64 {
    1.0 / (c * n as f64)
}

/// The regularized empirical hinge objective at `(w, b)`.
pub fn objective(model: &LinearSvmModel, train: &TrainingSet, lambda: f64) -> f64 {
    let norm2 = dot(&model.weights, &model.weights) + model.bias * model.bias;
    let hinge: f64 = train
        .rows()
        .map(|(x, y)| (1.0 - y.sign() * (dot(&model.weights, x) + model.bias)).max(0.0))
        .sum();
    0.5 * lambda * norm2 + hinge / train.len() as f64
}

pub fn train_svm(train: &TrainingSet, config: &SvmConfig, seed: u64) -> Result<LinearSvmModel> {
    train_svm_traced(train, config, seed).map(|(m, _)| m)
}

/// Trains and also returns the objective after every epoch, measured at
/// the epoch's averaged iterate.
pub fn train_svm_traced(
    train: &TrainingSet,
    config: &SvmConfig,
    seed: u64,
) -> Result<(LinearSvmModel, Vec<f64>)> {
    if !(config.c > 0.0) || !config.c.is_finite() {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", config.c)));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    }
    train.require_both_classes()?;

    let n = train.len();
    let d = train.dim();
    let lam = lambda(config.c, n);
    let radius = 1.0 / lam.sqrt();
    // w[d] is the bias weight of the constant feature.
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::seeded(seed);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut t: u64 = 0;
    let mut model = LinearSvmModel {
        weights: vec![0.0; d],
        bias: 0.0,
        c: config.c,
    };

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        avg.iter_mut().for_each(|a| *a = 0.0);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lam * t as f64);
            let x = train.row(i);
            let y = train.label(i).sign();
            let margin = y * (dot(&w[..d], x) + w[d]);
            let shrink = 1.0 - eta * lam;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w[..d].iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                w[d] += eta * y;
            }
            if config.project {
                let norm = dot(&w, &w).sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += v;
            }
        }
        model.weights = avg[..d].iter().map(|a| a / n as f64).collect();
        model.bias = avg[d] / n as f64;
        trace.push(objective(&model, train, lam));
    }
    if model.weights.iter().any(|v| !v.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Validation("SVM training diverged".into()));
    }
    Ok((model, trace))
}
