//! L2-regularized logistic regression fitted by full-batch gradient descent.
//!
//! Objective: mean negative log-likelihood `+ (l2/2) ‖w‖²`; the bias is not
//! regularized. Each epoch takes one gradient step whose length starts at
//! the previous accepted step times 1.5 (capped at `lr`·1e6) and is halved
//! until the Armijo condition holds, so the objective never increases.

use serde::{Deserialize, Serialize};

use super::{check_dim, dot, TrainingSet};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    /// Initial step length.
    pub lr: f64,
    pub epochs: usize,
    /// Stop once the gradient's ∞-norm drops below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 0.0,
            lr: 1.0,
            epochs: 10_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

impl LogRegModel {
    /// P(violation | x).
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x)?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(label_from_probability(self.probability(x)?))
    }
}

pub fn label_from_probability(p: f64) -> Label {
    if p >= 0.5 {
        Label::Violation
    } else {
        Label::NonViolation
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn target(label: Label) -> f64 {
    if label.is_violation() {
        1.0
    } else {
        0.0
    }
}

/// Objective value at `params = [w..., b]`.
pub fn objective(params: &[f64], train: &TrainingSet, l2: f64) -> f64 {
    let d = train.dim();
    let (w, b) = (&params[..d], params[d]);
    let nll: f64 = train
        .rows()
        .map(|(x, y)| {
            let z = dot(w, x) + b;
            softplus(z) - target(y) * z
        })
        .sum();
    nll / train.len() as f64 + 0.5 * l2 * dot(w, w)
}

/// Objective and its gradient with respect to `[w..., b]`.
pub fn objective_and_gradient(params: &[f64], train: &TrainingSet, l2: f64) -> (f64, Vec<f64>) {
    let d = train.dim();
    let n = train.len() as f64;
    let (w, b) = (&params[..d], params[d]);
    let mut grad = vec![0.0; d + 1];
    let mut nll = 0.0;
    for (x, y) in train.rows() {
        let z = dot(w, x) + b;
        let t = target(y);
        nll += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, xj) in grad[..d].iter_mut().zip(x) {
            *g += r * xj;
        }
        grad[d] += r;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, wj) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wj;
    }
    (nll / n + 0.5 * l2 * dot(w, w), grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegTrace {
    /// Objective before the first step and after every accepted step.
    pub objectives: Vec<f64>,
    pub final_grad_norm: f64,
    pub converged: bool,
}

pub fn train_logreg(train: &TrainingSet, config: &LogRegConfig) -> Result<LogRegModel> {
    train_logreg_traced(train, config).map(|(m, _)| m)
}

pub fn train_logreg_traced(
    train: &TrainingSet,
    config: &LogRegConfig,
) -> Result<(LogRegModel, LogRegTrace)> {
    if !(config.l2 >= 0.0) || !(config.lr > 0.0) || !(config.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid logistic regression settings {config:?}"
        )));
    }
    train.require_both_classes()?;
    let d = train.dim();
    let mut params = vec![0.0; d + 1];
    let (mut value, mut grad) = objective_and_gradient(&params, train, config.l2);
    let mut objectives = vec![value];
    let mut step = config.lr;
    let max_step = config.lr * 1e6;
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut converged = inf_norm(&grad) < config.tol;

    for _ in 0..config.epochs {
        if converged {
            break;
        }
        let g2 = dot(&grad, &grad);
        let mut accepted = None;
        let mut s = step;
        while s > f64::MIN_POSITIVE {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - s * g).collect();
            let v = objective(&candidate, train, config.l2);
            if v <= value - 0.5 * s * g2 {
                accepted = Some((candidate, s));
                break;
            }
            s *= 0.5;
        }
        // No decreasing step exists at machine precision: we are at the optimum.
        let Some((candidate, s)) = accepted else {
            break;
        };
        params = candidate;
        (value, grad) = objective_and_gradient(&params, train, config.l2);
        objectives.push(value);
        step = (s * 1.5).min(max_step);
        converged = inf_norm(&grad) < config.tol;
    }

    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("logistic regression diverged".into()));
    }
    let bias = params[d];
    params.truncate(d);
    Ok((
        LogRegModel {
            weights: params,
            bias,
            l2: config.l2,
        },
        LogRegTrace {
            objectives,
            final_grad_norm: inf_norm(&grad),
            converged,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_at_one_half() {
        assert_eq!(label_from_probability(0.4), Label::NonViolation);
        assert_eq!(label_from_probability(0.5), Label::Violation);
        let m = LogRegModel {
            weights: vec![1.0],
            bias: 0.0,
            l2: 0.0,
        };
        assert_eq!(m.predict(&[0.0]).unwrap(), Label::Violation);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }
}
