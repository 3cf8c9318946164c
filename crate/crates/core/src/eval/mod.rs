//! Confusion matrices, precision/recall/F1/accuracy, cross-validation and
//! the improvement percentages reported next to voting results.

pub mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{kfold, Dataset, Label, LabeledComment};
use crate::error::{Error, Result};

/// Counts with `violation` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Violation, Label::Violation) => self.tp += 1,
            (Label::Violation, Label::NonViolation) => self.fp += 1,
            (Label::NonViolation, Label::Violation) => self.fn_ += 1,
            (Label::NonViolation, Label::NonViolation) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions to evaluate".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        cm.record(p, t);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// No item was predicted as a violation (TP + FP = 0).
    #[serde(default)]
    pub precision_undefined: bool,
    /// No item is a violation (TP + FN = 0).
    #[serde(default)]
    pub recall_undefined: bool,
}

impl MetricsReport {
    /// A report carrying only the four values, e.g. parsed from a table.
    pub fn from_values(precision: f64, recall: f64, f1: f64, accuracy: f64) -> Self {
        MetricsReport {
            precision,
            recall,
            f1,
            accuracy,
            precision_undefined: false,
            recall_undefined: false,
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Accuracy => self.accuracy,
        }
    }
}

/// Precision, recall, F1 and accuracy. A zero denominator yields 0 and
/// sets the matching `*_undefined` flag.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let precision_undefined = cm.tp + cm.fp == 0;
    let recall_undefined = cm.tp + cm.fn_ == 0;
    let precision = if precision_undefined { 0.0 } else { tp / (tp + fp) };
    let recall = if recall_undefined { 0.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsReport {
        precision,
        recall,
        f1,
        accuracy: (tp + tn) / total as f64,
        precision_undefined,
        recall_undefined,
    })
}

pub fn evaluate(predictions: &[Label], truths: &[Label]) -> Result<MetricsReport> {
    metrics(&confusion(predictions, truths)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::F1, Metric::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::F1 => "F1-score",
            Metric::Accuracy => "Accuracy",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// A percentage held exactly in hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent {
    hundredths: i64,
}

impl Percent {
    pub fn from_hundredths(hundredths: i64) -> Self {
        Percent { hundredths }
    }

    pub fn hundredths(self) -> i64 {
        self.hundredths
    }

    pub fn value(self) -> f64 {
        self.hundredths as f64 / 100.0
    }

    /// Decimal form without the percent sign, e.g. `-0.67`.
    pub fn decimal(self) -> String {
        let sign = if self.hundredths < 0 { "-" } else { "" };
        let abs = self.hundredths.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.decimal())
    }
}

/// `(voting - baseline) / baseline` as a percentage rounded half-up
/// (away from zero) to two decimals.
pub fn improvement(voting: f64, baseline: f64) -> Result<Percent> {
    if !(baseline > 0.0) || !voting.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "improvement needs a positive baseline, got {baseline}"
        )));
    }
    let hundredths = (voting - baseline) / baseline * 10_000.0;
    // Snap representation error (e.g. 12.4999999999) before rounding.
    let snapped = (hundredths * 1e6).round() / 1e6;
    Ok(Percent {
        hundredths: snapped.round() as i64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    if values.is_empty() {
        return Summary { mean: 0.0, sd: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Summary { mean, sd }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<MetricsReport>,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub accuracy: Summary,
}

impl CvReport {
    pub fn from_folds(k: usize, seed: u64, folds: Vec<MetricsReport>) -> Self {
        let column = |m: Metric| summarize(&folds.iter().map(|r| r.get(m)).collect::<Vec<_>>());
        CvReport {
            k,
            seed,
            precision: column(Metric::Precision),
            recall: column(Metric::Recall),
            f1: column(Metric::F1),
            accuracy: column(Metric::Accuracy),
            folds,
        }
    }

    pub fn summary(&self, metric: Metric) -> Summary {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Accuracy => self.accuracy,
        }
    }

    /// Per-metric fold means as a single report.
    pub fn mean_report(&self) -> MetricsReport {
        MetricsReport::from_values(
            self.precision.mean,
            self.recall.mean,
            self.f1.mean,
            self.accuracy.mean,
        )
    }
}

/// Anything that can label a review comment.
pub trait Classify {
    fn classify(&self, item: &LabeledComment) -> Result<Label>;
}

impl<F> Classify for F
where
    F: Fn(&LabeledComment) -> Result<Label>,
{
    fn classify(&self, item: &LabeledComment) -> Result<Label> {
        self(item)
    }
}

/// k-fold cross-validation: `trainer` is called once per fold with the
/// fold index and its training part; the returned classifier is scored on
/// the held-out fold.
pub fn cross_validate<T, C>(mut trainer: T, d: &Dataset, k: usize, seed: u64) -> Result<CvReport>
where
    T: FnMut(usize, &Dataset) -> Result<C>,
    C: Classify,
{
    let folds = kfold(d, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for fold in &folds {
        let wrap = |e: Error| e.context(format!("fold {}", fold.index));
        let classifier = trainer(fold.index, &fold.train).map_err(wrap)?;
        let predictions = fold
            .test
            .items()
            .iter()
            .map(|item| classifier.classify(item))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        reports.push(evaluate(&predictions, &fold.test.labels()).map_err(wrap)?);
    }
    Ok(CvReport::from_folds(k, seed, reports))
}
