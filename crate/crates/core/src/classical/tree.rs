//! CART decision tree grown greedily on Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values
//! of a feature; a sample goes left when `x[feature] <= threshold`. Among
//! equally good splits the lowest feature index wins, then the lowest
//! threshold. Splits with zero impurity decrease are still taken while the
//! node is impure, so XOR-like patterns can be carved out at depth two.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_dim, TrainingSet};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until purity or the leaf-size limit.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Sample counts indexed by `Label::index()`.
    Leaf { counts: [usize; 2] },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub dim: usize,
    /// Flat node storage; the root is node 0.
    pub nodes: Vec<Node>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

/// `1 − Σ p_c²` over the class counts.
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - a * a - b * b
}

impl DecisionTreeModel {
    fn leaf_for(&self, x: &[f64]) -> Result<[usize; 2]> {
        check_dim(self.dim, x)?;
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return Ok(*counts),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Share of violation samples in the leaf `x` falls into.
    pub fn violation_fraction(&self, x: &[f64]) -> Result<f64> {
        let c = self.leaf_for(x)?;
        Ok(c[0] as f64 / (c[0] + c[1]) as f64)
    }

    /// Majority class of the leaf; an even leaf goes to violation.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let c = self.leaf_for(x)?;
        Ok(if c[Label::Violation.index()] >= c[Label::NonViolation.index()] {
            Label::Violation
        } else {
            Label::NonViolation
        })
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct Builder<'a> {
    train: &'a TrainingSet,
    config: TreeConfig,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0; 2];
        for &i in idx {
            c[self.train.label(i).index()] += 1;
        }
        c
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.config.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || idx.len() < 2 * self.config.min_samples_leaf {
            return at;
        }
        let Some(best) = self.best_split(&idx, counts) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.train.row(i)[best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[usize], parent: [usize; 2]) -> Option<BestSplit> {
        let n = idx.len();
        let msl = self.config.min_samples_leaf;
        let parent_gini = gini(parent);
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.train.dim() {
            let value = |i: usize| self.train.row(i)[f];
            sorted.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut left = [0usize; 2];
            for pos in 1..n {
                left[self.train.label(sorted[pos - 1]).index()] += 1;
                let (lo, hi) = (value(sorted[pos - 1]), value(sorted[pos]));
                if lo.partial_cmp(&hi) != Some(Ordering::Less) || pos < msl || n - pos < msl {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let weighted = (pos as f64 * gini(left) + (n - pos) as f64 * gini(right)) / n as f64;
                let decrease = parent_gini - weighted;
                if best.as_ref().is_none_or(|b| decrease > b.decrease + 1e-12) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                        decrease,
                    });
                }
            }
        }
        best
    }
}

pub fn train_dt(train: &TrainingSet, config: &TreeConfig) -> Result<DecisionTreeModel> {
    if config.min_samples_leaf == 0 {
        return Err(Error::InvalidArgument("min_samples_leaf must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot grow a tree on no samples".into()));
    }
    let mut b = Builder {
        train,
        config: *config,
        nodes: Vec::new(),
    };
    b.grow((0..train.len()).collect(), 0);
    Ok(DecisionTreeModel {
        dim: train.dim(),
        nodes: b.nodes,
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
    })
}
