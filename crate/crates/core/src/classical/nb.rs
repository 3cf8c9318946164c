//! Bernoulli naive Bayes on features binarized at a threshold.

use serde::{Deserialize, Serialize};

use super::{check_dim, label_from_score, TrainingSet};
use crate::corpus::Label;
use crate::error::{Error, Result};

/// Per-class parameters are indexed by `Label::index()` (violation first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNbModel {
    pub log_prior: [f64; 2],
    /// `log_p[class][feature] = ln P(feature = 1 | class)`.
    pub log_p: [Vec<f64>; 2],
    pub binarize_threshold: f64,
    pub alpha: f64,
}

pub fn binarize(x: &[f64], threshold: f64) -> Vec<bool> {
    x.iter().map(|&v| v > threshold).collect()
}

impl BernoulliNbModel {
    pub fn dim(&self) -> usize {
        self.log_p[0].len()
    }

    /// Joint log-likelihood of `x` under each class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_dim(self.dim(), x)?;
        let bits = binarize(x, self.binarize_threshold);
        let mut out = self.log_prior;
        for (c, total) in out.iter_mut().enumerate() {
            for (&on, &lp) in bits.iter().zip(&self.log_p[c]) {
                // ln(1 - p) from ln p without cancellation
                *total += if on { lp } else { (-lp.exp()).ln_1p() };
            }
        }
        Ok(out)
    }

    /// `ln P(violation | x) − ln P(non_violation | x)`.
    pub fn log_odds(&self, x: &[f64]) -> Result<f64> {
        let jll = self.joint_log_likelihood(x)?;
        Ok(jll[Label::Violation.index()] - jll[Label::NonViolation.index()])
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.log_odds(x).map(label_from_score)
    }
}

pub fn train_nb(train: &TrainingSet, alpha: f64, binarize_threshold: f64) -> Result<BernoulliNbModel> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if !binarize_threshold.is_finite() {
        return Err(Error::InvalidArgument("binarize threshold must be finite".into()));
    }
    train.require_both_classes()?;
    let d = train.dim();
    let mut class_n = [0usize; 2];
    let mut on = [vec![0usize; d], vec![0usize; d]];
    for (x, y) in train.rows() {
        let c = y.index();
        class_n[c] += 1;
        for (count, &v) in on[c].iter_mut().zip(x) {
            if v > binarize_threshold {
                *count += 1;
            }
        }
    }
    let n = train.len() as f64;
    let log_p = [0, 1].map(|c| {
        let denom = class_n[c] as f64 + 2.0 * alpha;
        on[c].iter().map(|&k| ((k as f64 + alpha) / denom).ln()).collect()
    });
    Ok(BernoulliNbModel {
        log_prior: [0, 1].map(|c| (class_n[c] as f64 / n).ln()),
        log_p,
        binarize_threshold,
        alpha,
    })
}
