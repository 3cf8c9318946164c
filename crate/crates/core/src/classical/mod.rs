//! The five classical classifiers over document vectors, and exhaustive
//! grid search scored on a validation set.
//!
//! Violation is the positive class everywhere: SVM and LR scores are
//! positive on the violation side and a score of exactly zero (posterior
//! exactly 0.5) resolves to violation.

pub mod grid;
pub mod knn;
pub mod logreg;
pub mod nb;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

pub use grid::{
    default_grid, grid_search, train_point, GridPoint, GridScore, GridSearchResult, HyperGrid,
    ParamValue,
};
pub use knn::{train_knn, DistanceMetric, KnnModel};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use nb::{train_nb, BernoulliNbModel};
pub use svm::{train_svm, LinearSvmModel, SvmConfig};
pub use tree::{gini, train_dt, DecisionTreeModel, TreeConfig};

/// Row-major feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    x: Vec<f64>,
    y: Vec<Label>,
}

impl TrainingSet {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if x.len() != dim * y.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * y.len(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        Ok(TrainingSet { dim, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[Label]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows for {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut x = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            x.extend_from_slice(r);
        }
        Self::new(dim, x, labels.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.y[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.y
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], Label)> {
        self.x.chunks_exact(self.dim).zip(self.y.iter().copied())
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let v = self.y.iter().filter(|l| l.is_violation()).count();
        if v == 0 || v == self.len() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maps a signed score to a label; zero goes to violation.
pub fn label_from_score(score: f64) -> Label {
    if score >= 0.0 {
        Label::Violation
    } else {
        Label::NonViolation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Svm,
    Logreg,
    Nb,
    Dt,
    Knn,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Svm, Family::Logreg, Family::Nb, Family::Dt, Family::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Svm => "svm",
            Family::Logreg => "logreg",
            Family::Nb => "nb",
            Family::Dt => "dt",
            Family::Knn => "knn",
        }
    }

    /// Short display name used in report tables.
    pub fn display(self) -> &'static str {
        match self {
            Family::Svm => "SVM",
            Family::Logreg => "LR",
            Family::Nb => "NB",
            Family::Dt => "DT",
            Family::Knn => "kNN",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(Family::Svm),
            "logreg" | "lr" => Ok(Family::Logreg),
            "nb" => Ok(Family::Nb),
            "dt" => Ok(Family::Dt),
            "knn" => Ok(Family::Knn),
            other => Err(Error::InvalidArgument(format!("unknown classifier family '{other}'"))),
        }
    }
}

/// A trained classical model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClassicalModel {
    Svm(LinearSvmModel),
    Logreg(LogRegModel),
    Nb(BernoulliNbModel),
    Dt(DecisionTreeModel),
    Knn(KnnModel),
}

impl ClassicalModel {
    pub fn family(&self) -> Family {
        match self {
            ClassicalModel::Svm(_) => Family::Svm,
            ClassicalModel::Logreg(_) => Family::Logreg,
            ClassicalModel::Nb(_) => Family::Nb,
            ClassicalModel::Dt(_) => Family::Dt,
            ClassicalModel::Knn(_) => Family::Knn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClassicalModel::Svm(m) => m.weights.len(),
            ClassicalModel::Logreg(m) => m.weights.len(),
            ClassicalModel::Nb(m) => m.dim(),
            ClassicalModel::Dt(m) => m.dim,
            ClassicalModel::Knn(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            ClassicalModel::Svm(m) => m.predict(x),
            ClassicalModel::Logreg(m) => m.predict(x),
            ClassicalModel::Nb(m) => m.predict(x),
            ClassicalModel::Dt(m) => m.predict(x),
            ClassicalModel::Knn(m) => m.predict(x),
        }
    }

    /// A real-valued confidence where larger means more violation-like.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            ClassicalModel::Svm(m) => m.decision(x),
            ClassicalModel::Logreg(m) => m.probability(x),
            ClassicalModel::Nb(m) => m.log_odds(x),
            ClassicalModel::Dt(m) => m.violation_fraction(x),
            ClassicalModel::Knn(m) => m.violation_fraction(x),
        }
    }

    pub fn predict_all(&self, set: &TrainingSet) -> Result<Vec<Label>> {
        set.rows().map(|(x, _)| self.predict(x)).collect()
    }
}
