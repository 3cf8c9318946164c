//! k-nearest-neighbour majority vote over the stored training set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_dim, dot, TrainingSet};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Euclidean,
    /// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
    Cosine,
}

impl DistanceMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            DistanceMetric::Cosine => {
                let na = dot(a, a).sqrt();
                let nb = dot(b, b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / (na * nb)
                }
            }
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown distance metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: DistanceMetric,
    dim: usize,
    /// Row-major stored vectors.
    points: Vec<f64>,
    labels: Vec<Label>,
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stored(&self) -> usize {
        self.labels.len()
    }

    /// Indices of the k nearest stored points; equal distances keep the
    /// lower stored index first.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim, x)?;
        let mut d: Vec<(f64, usize)> = self
            .points
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, p)| (self.metric.distance(x, p), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(d.into_iter().take(self.k).map(|(_, i)| i).collect())
    }

    pub fn violation_fraction(&self, x: &[f64]) -> Result<f64> {
        let nb = self.neighbours(x)?;
        let v = nb.iter().filter(|&&i| self.labels[i].is_violation()).count();
        Ok(v as f64 / nb.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        // k is odd, so the vote never ties
        Ok(if self.violation_fraction(x)? > 0.5 {
            Label::Violation
        } else {
            Label::NonViolation
        })
    }
}

pub fn train_knn(train: &TrainingSet, k: usize, metric: DistanceMetric) -> Result<KnnModel> {
    if k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("k must be odd, got {k}")));
    }
    if k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} stored points",
            train.len()
        )));
    }
    let mut points = Vec::with_capacity(train.len() * train.dim());
    for (x, _) in train.rows() {
        points.extend_from_slice(x);
    }
    Ok(KnnModel {
        k,
        metric,
        dim: train.dim(),
        points,
        labels: train.labels().to_vec(),
    })
}
