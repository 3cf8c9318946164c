//! Labeled review-comment datasets: the JSON Lines file format, class
//! balancing, the train/validation/test split and k-fold partitioning.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::rng::{self, DEFAULT_SEED};

/// Binary class of a review comment. `Violation` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Violation,
    NonViolation,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Violation, Label::NonViolation];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Violation => "violation",
            Label::NonViolation => "non_violation",
        }
    }

    pub fn is_violation(self) -> bool {
        self == Label::Violation
    }

    /// +1 for violation, -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Label::Violation => 1.0,
            Label::NonViolation => -1.0,
        }
    }

    /// Class index used by the neural model's output layer.
    pub fn index(self) -> usize {
        match self {
            Label::Violation => 0,
            Label::NonViolation => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "violation" => Ok(Label::Violation),
            "non_violation" => Ok(Label::NonViolation),
            other => Err(Error::Validation(format!("unknown label {other:?}"))),
        }
    }
}

/// One comment mined from a code review, either inline on a file or on the
/// change as a whole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    pub id: String,
    pub project: String,
    pub change_number: u64,
    pub revision_id: String,
    /// Empty for change-level messages.
    pub file_path: String,
    pub line: Option<u32>,
    pub message: String,
    pub url: String,
    pub timestamp: String,
}

impl ReviewComment {
    /// Applies NFC normalization to the message.
    pub fn normalized(mut self) -> Self {
        self.message = self.message.nfc().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    #[serde(flatten)]
    pub comment: ReviewComment,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub violation: usize,
    pub non_violation: usize,
}

impl LabelCounts {
    pub fn of(items: &[LabeledComment]) -> Self {
        let violation = items.iter().filter(|c| c.label.is_violation()).count();
        LabelCounts {
            violation,
            non_violation: items.len() - violation,
        }
    }

    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Violation => self.violation,
            Label::NonViolation => self.non_violation,
        }
    }
}

/// An ordered, validated collection of labeled comments.
///
/// Item order is the canonical order for every seeded operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    seed: u64,
    items: Vec<LabeledComment>,
    counts: LabelCounts,
}

impl Dataset {
    pub fn new(name: impl Into<String>, seed: u64, items: Vec<LabeledComment>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if !seen.insert(item.comment.id.as_str()) {
                return Err(Error::Validation(format!(
                    "item {}: duplicate id {:?}",
                    i + 1,
                    item.comment.id
                )));
            }
            if item.comment.message.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "item {}: empty message for id {:?}",
                    i + 1,
                    item.comment.id
                )));
            }
        }
        Ok(Self::from_validated(name.into(), seed, items))
    }

    fn from_validated(name: String, seed: u64, items: Vec<LabeledComment>) -> Self {
        let counts = LabelCounts::of(&items);
        Dataset {
            name,
            seed,
            items,
            counts,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn items(&self) -> &[LabeledComment] {
        &self.items
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.items.iter().map(|c| c.label).collect()
    }

    /// Subset in the order given by `indices` (already validated items).
    fn subset(&self, suffix: &str, indices: &[usize]) -> Dataset {
        let items = indices.iter().map(|&i| self.items[i].clone()).collect();
        Dataset::from_validated(format!("{}/{}", self.name, suffix), self.seed, items)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Reads a JSON Lines dataset. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(BufReader::new(file), name, DEFAULT_SEED)
}

pub fn read_dataset(reader: impl BufRead, name: String, seed: u64) -> Result<Dataset> {
    #[derive(Deserialize)]
    struct Record {
        #[serde(flatten)]
        comment: ReviewComment,
        label: Option<String>,
    }

    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let label = match record.label.as_deref() {
            Some(s) => s.parse::<Label>().map_err(|_| {
                Error::Validation(format!("line {lineno}: unknown label {s:?}"))
            })?,
            None => {
                return Err(Error::Validation(format!("line {lineno}: missing label")));
            }
        };
        let comment = record.comment.normalized();
        if comment.message.trim().is_empty() {
            return Err(Error::Validation(format!("line {lineno}: empty message")));
        }
        if !seen.insert(comment.id.clone()) {
            return Err(Error::Validation(format!(
                "line {lineno}: duplicate id {:?}",
                comment.id
            )));
        }
        items.push(LabeledComment { comment, label });
    }
    Ok(Dataset::from_validated(name, seed, items))
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(dataset.to_jsonl()?.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Down-samples the majority class without replacement to the size of the
/// minority class. Survivors keep their relative order.
pub fn balance_classes(d: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = d.counts();
    if counts.violation == 0 || counts.non_violation == 0 {
        return Err(Error::Validation(format!(
            "cannot balance {:?}: a label is absent ({} violation, {} non_violation)",
            d.name(),
            counts.violation,
            counts.non_violation
        )));
    }
    if counts.violation == counts.non_violation {
        return Ok(d.clone());
    }
    let (majority, target) = if counts.violation > counts.non_violation {
        (Label::Violation, counts.non_violation)
    } else {
        (Label::NonViolation, counts.violation)
    };

    let majority_positions: Vec<usize> = d
        .items
        .iter()
        .enumerate()
        .filter(|(_, c)| c.label == majority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = rng::seeded(seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, majority_positions.len(), target)
        .into_iter()
        .map(|j| majority_positions[j])
        .collect();
    keep.extend(
        d.items
            .iter()
            .enumerate()
            .filter(|(_, c)| c.label != majority)
            .map(|(i, _)| i),
    );
    keep.sort_unstable();

    let mut out = d.subset("balanced", &keep);
    out.name = d.name.clone();
    Ok(out)
}

/// Train/validation/test proportions as integer parts of a whole, so the
/// fractions always sum to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: u32,
    pub val: u32,
    pub test: u32,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 60,
            val: 20,
            test: 20,
            seed: DEFAULT_SEED,
        }
    }
}

impl SplitSpec {
    pub fn new(train: u32, val: u32, test: u32, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    fn total(&self) -> u64 {
        u64::from(self.train) + u64::from(self.val) + u64::from(self.test)
    }

    /// (train, val, test) sizes for `n` items: floor, floor, remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n64 = n as u64;
        let train = (n64 * u64::from(self.train) / self.total()) as usize;
        let val = (n64 * u64::from(self.val) / self.total()) as usize;
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

fn shuffled_positions(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    order
}

pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if d.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "split needs at least 5 items, dataset has {}",
            d.len()
        )));
    }
    let order = shuffled_positions(d.len(), spec.seed);
    let (n_train, n_val, _) = spec.sizes(d.len());
    Ok(Split {
        train: d.subset("train", &order[..n_train]),
        val: d.subset("val", &order[n_train..n_train + n_val]),
        test: d.subset("test", &order[n_train + n_val..]),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Sizes of the `k` test folds for `n` items: the first `n mod k` folds hold
/// one extra item.
pub fn fold_sizes(n: usize, k: usize) -> Vec<usize> {
    let (q, r) = (n / k, n % k);
    (0..k).map(|i| if i < r { q + 1 } else { q }).collect()
}

pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > d.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in [2, {}], got {k}",
            d.len()
        )));
    }
    let order = shuffled_positions(d.len(), seed);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for (index, size) in fold_sizes(d.len(), k).into_iter().enumerate() {
        let end = start + size;
        let train: Vec<usize> = order[..start].iter().chain(&order[end..]).copied().collect();
        folds.push(Fold {
            index,
            train: d.subset(&format!("fold{index}/train"), &train),
            test: d.subset(&format!("fold{index}/test"), &order[start..end]),
        });
        start = end;
    }
    Ok(folds)
}
