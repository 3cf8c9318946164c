//! Exhaustive hyperparameter search scored by validation F1.

use std::fmt;

use rayon::prelude::*;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::knn::DistanceMetric;
use super::logreg::LogRegConfig;
use super::svm::SvmConfig;
use super::tree::TreeConfig;
use super::{train_dt, train_knn, train_logreg, train_nb, train_svm, ClassicalModel, Family, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::rng;

/// One candidate value. `Unbounded` is written as the string `"inf"`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
    Unbounded,
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) => usize::try_from(*i).ok(),
            ParamValue::Float(f) if f.fract() == 0.0 && *f >= 0.0 => Some(*f as usize),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
            ParamValue::Unbounded => f.write_str("inf"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        if v == "inf" {
            ParamValue::Unbounded
        } else {
            ParamValue::Text(v.to_string())
        }
    }
}

impl Serialize for ParamValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ParamValue::Int(i) => s.serialize_i64(*i),
            ParamValue::Float(f) => s.serialize_f64(*f),
            ParamValue::Text(t) => s.serialize_str(t),
            ParamValue::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ParamValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Int(i) => ParamValue::Int(i),
            Raw::Float(f) => ParamValue::Float(f),
            Raw::Text(t) => ParamValue::from(t.as_str()),
        })
    }
}

/// An assignment of one value per axis, in canonical axis order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridPoint {
    pub values: Vec<(String, ParamValue)>,
}

impl GridPoint {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| bad_value(name, v)),
        }
    }

    fn usize_or(&self, name: &str, default: usize) -> Result<usize> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v.as_usize().ok_or_else(|| bad_value(name, v)),
        }
    }
}

fn bad_value(name: &str, v: &ParamValue) -> Error {
    Error::InvalidArgument(format!("invalid value {v} for parameter '{name}'"))
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

// Serialized as a JSON object whose key order is the axis order.
impl Serialize for GridPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (n, v) in &self.values {
            map.serialize_entry(n, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for GridPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = GridPoint;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of parameter values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<GridPoint, A::Error> {
                let mut values = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, ParamValue>()? {
                    values.push((k, v));
                }
                Ok(GridPoint { values })
            }
        }
        d.deserialize_map(V).map_err(de::Error::custom)
    }
}

/// Parameter names each family accepts, in canonical order.
pub fn parameter_names(family: Family) -> &'static [&'static str] {
    match family {
        Family::Svm => &["c", "epochs"],
        Family::Logreg => &["l2", "lr", "epochs", "tol"],
        Family::Nb => &["alpha", "threshold"],
        Family::Dt => &["max_depth", "min_samples_leaf"],
        Family::Knn => &["k", "metric"],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub family: Family,
    axes: Vec<(String, Vec<ParamValue>)>,
}

impl HyperGrid {
    /// Validates axis names and sorts the axes into canonical order; the
    /// candidate order within each axis is kept.
    pub fn new(family: Family, axes: Vec<(String, Vec<ParamValue>)>) -> Result<Self> {
        let names = parameter_names(family);
        let mut keyed = Vec::with_capacity(axes.len());
        for (name, values) in axes {
            let pos = names.iter().position(|n| *n == name).ok_or_else(|| {
                Error::InvalidArgument(format!("{family} has no parameter '{name}'"))
            })?;
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("axis '{name}' has no candidates")));
            }
            if keyed.iter().any(|(p, _, _)| *p == pos) {
                return Err(Error::InvalidArgument(format!("axis '{name}' given twice")));
            }
            keyed.push((pos, name, values));
        }
        keyed.sort_by_key(|(p, _, _)| *p);
        Ok(HyperGrid {
            family,
            axes: keyed.into_iter().map(|(_, n, v)| (n, v)).collect(),
        })
    }

    pub fn axes(&self) -> &[(String, Vec<ParamValue>)] {
        &self.axes
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Cartesian product with the first axis varying slowest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = vec![GridPoint::default()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.values.push((name.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

pub fn default_grid(family: Family) -> HyperGrid {
    let f = |v: &[f64]| v.iter().map(|&x| ParamValue::Float(x)).collect::<Vec<_>>();
    let i = |v: &[i64]| v.iter().map(|&x| ParamValue::Int(x)).collect::<Vec<_>>();
    let axes = match family {
        Family::Svm => vec![("c", f(&[0.01, 0.1, 1.0, 10.0, 100.0]))],
        Family::Logreg => vec![("l2", f(&[0.0, 0.01, 0.1, 1.0]))],
        Family::Nb => vec![("alpha", f(&[0.5, 1.0, 2.0])), ("threshold", f(&[0.0]))],
        Family::Dt => {
            let mut depth = i(&[3, 5, 10]);
            depth.push(ParamValue::Unbounded);
            vec![("max_depth", depth), ("min_samples_leaf", i(&[1, 3, 5]))]
        }
        Family::Knn => vec![
            ("k", i(&[1, 3, 5, 7, 9, 11])),
            ("metric", vec!["euclidean".into(), "cosine".into()]),
        ],
    };
    HyperGrid::new(family, axes.into_iter().map(|(n, v)| (n.to_string(), v)).collect())
        .expect("default grids are valid")
}

/// Trains one model of `family` with the given point; absent parameters
/// take their defaults.
pub fn train_point(family: Family, point: &GridPoint, train: &TrainingSet, seed: u64) -> Result<ClassicalModel> {
    let names = parameter_names(family);
    if let Some((n, _)) = point.values.iter().find(|(n, _)| !names.contains(&n.as_str())) {
        return Err(Error::InvalidArgument(format!("{family} has no parameter '{n}'")));
    }
    Ok(match family {
        Family::Svm => {
            let d = SvmConfig::default();
            let cfg = SvmConfig {
                c: point.f64_or("c", d.c)?,
                epochs: point.usize_or("epochs", d.epochs)?,
                ..d
            };
            ClassicalModel::Svm(train_svm(train, &cfg, seed)?)
        }
        Family::Logreg => {
            let d = LogRegConfig::default();
            let cfg = LogRegConfig {
                l2: point.f64_or("l2", d.l2)?,
                lr: point.f64_or("lr", d.lr)?,
                epochs: point.usize_or("epochs", d.epochs)?,
                tol: point.f64_or("tol", d.tol)?,
            };
            ClassicalModel::Logreg(train_logreg(train, &cfg)?)
        }
        Family::Nb => ClassicalModel::Nb(train_nb(
            train,
            point.f64_or("alpha", 1.0)?,
            point.f64_or("threshold", 0.0)?,
        )?),
        Family::Dt => {
            let max_depth = match point.get("max_depth") {
                None | Some(ParamValue::Unbounded) => None,
                Some(v) => Some(v.as_usize().ok_or_else(|| bad_value("max_depth", v))?),
            };
            let cfg = TreeConfig {
                max_depth,
                min_samples_leaf: point.usize_or("min_samples_leaf", 1)?,
            };
            ClassicalModel::Dt(train_dt(train, &cfg)?)
        }
        Family::Knn => {
            let metric = match point.get("metric") {
                None => DistanceMetric::Euclidean,
                Some(ParamValue::Text(s)) => s.parse()?,
                Some(v) => return Err(bad_value("metric", v)),
            };
            ClassicalModel::Knn(train_knn(train, point.usize_or("k", 5)?, metric)?)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub index: usize,
    pub point: GridPoint,
    pub validation: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: ClassicalModel,
    pub best_index: usize,
    pub best_point: GridPoint,
    /// One row per grid point, in grid order.
    pub scores: Vec<GridScore>,
}

/// Trains every grid point on `train` (in parallel, point `i` seeded with
/// `seed ^ i`) and keeps the one with the highest validation F1. The
/// earliest point wins ties, so the result equals a sequential search.
pub fn grid_search(grid: &HyperGrid, train: &TrainingSet, val: &TrainingSet, seed: u64) -> Result<GridSearchResult> {
    if val.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    let points = grid.points();
    let outcomes: Vec<Result<(ClassicalModel, MetricsReport)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let model = train_point(grid.family, p, train, rng::derive(seed, i as u64))?;
            let preds = model.predict_all(val)?;
            let report = evaluate(&preds, val.labels())?;
            Ok((model, report))
        })
        .collect();

    let mut scores = Vec::with_capacity(points.len());
    let mut best: Option<(usize, ClassicalModel)> = None;
    for (i, (outcome, point)) in outcomes.into_iter().zip(points).enumerate() {
        let (model, report) =
            outcome.map_err(|e| e.context(format!("{} grid point {i} ({point})", grid.family)))?;
        let better = match &best {
            None => true,
            Some((b, _)) => report.f1 > scores.get(*b).map_or(f64::MIN, |s: &GridScore| s.validation.f1),
        };
        if better {
            best = Some((i, model));
        }
        scores.push(GridScore {
            index: i,
            point,
            validation: report,
        });
    }
    let (best_index, best) = best.ok_or_else(|| Error::InvalidArgument("empty grid".into()))?;
    Ok(GridSearchResult {
        best,
        best_index,
        best_point: scores[best_index].point.clone(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        let sizes: Vec<usize> = Family::ALL.iter().map(|&f| default_grid(f).size()).collect();
        assert_eq!(sizes, vec![5, 4, 3, 12, 12]);
        for f in Family::ALL {
            assert_eq!(default_grid(f).points().len(), default_grid(f).size());
        }
    }

    #[test]
    fn first_axis_outermost() {
        let pts = default_grid(Family::Dt).points();
        assert_eq!(pts[0].to_string(), "max_depth=3, min_samples_leaf=1");
        assert_eq!(pts[1].to_string(), "max_depth=3, min_samples_leaf=3");
        assert_eq!(pts[11].to_string(), "max_depth=inf, min_samples_leaf=5");
    }

    #[test]
    fn axes_sorted_canonically() {
        let g = HyperGrid::new(
            Family::Knn,
            vec![
                ("metric".into(), vec!["cosine".into()]),
                ("k".into(), vec![ParamValue::Int(3)]),
            ],
        )
        .unwrap();
        assert_eq!(g.axes()[0].0, "k");
        assert!(HyperGrid::new(Family::Knn, vec![("gamma".into(), vec![ParamValue::Int(1)])]).is_err());
        assert!(HyperGrid::new(Family::Knn, vec![("k".into(), vec![])]).is_err());
    }

    #[test]
    fn param_values_serialize() {
        let p = GridPoint {
            values: vec![
                ("max_depth".into(), ParamValue::Unbounded),
                ("min_samples_leaf".into(), ParamValue::Int(3)),
            ],
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"max_depth":"inf","min_samples_leaf":3}"#);
        assert_eq!(serde_json::from_str::<GridPoint>(&json).unwrap(), p);
        let v: ParamValue = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, ParamValue::Float(0.5));
    }
}
