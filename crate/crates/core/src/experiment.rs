//! Glue between the data, model and evaluation modules: preprocessing a
//! dataset, training a family with grid search, scoring on held-out data.

use std::sync::Arc;

use crate::classical::{grid_search, GridSearchResult, HyperGrid, TrainingSet};
use crate::classifier::{Model, Pipeline, TrainedClassifier, TrainingMeta};
use crate::corpus::{Dataset, Label};
use crate::embeddings::{doc_vector, EmbeddingTable};
use crate::ensemble::{Voter, VotingEnsemble};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::textcnn::{self, EmbeddingMode, EmbeddingRef, TextCnnConfig, TrainHistory};
use crate::textprep::{preprocess, PreprocessConfig};

/// A preprocessed document: its tokens and label.
pub type Doc = (Vec<String>, Label);

pub fn tokenize_dataset(d: &Dataset, config: &PreprocessConfig) -> Vec<Doc> {
    d.items()
        .iter()
        .map(|c| (preprocess(&c.comment.message, config), c.label))
        .collect()
}

/// Mean-pooled document vectors.
pub fn doc_features(docs: &[Doc], table: &EmbeddingTable) -> Result<TrainingSet> {
    let dim = table.dim();
    let mut x = Vec::with_capacity(docs.len() * dim);
    for (tokens, _) in docs {
        x.extend(doc_vector(tokens, table).values);
    }
    TrainingSet::new(dim, x, docs.iter().map(|(_, l)| *l).collect())
}

pub fn train_classical(
    grid: &HyperGrid,
    train: &[Doc],
    val: &[Doc],
    table: &EmbeddingTable,
    seed: u64,
) -> Result<(TrainedClassifier, GridSearchResult)> {
    let tr = doc_features(train, table)?;
    let va = doc_features(val, table)?;
    let result = grid_search(grid, &tr, &va, seed)?;
    let classifier = TrainedClassifier {
        meta: TrainingMeta {
            family: grid.family.as_str().to_string(),
            seed,
            grid_point: Some(result.best_point.clone()),
            embedding: Some(EmbeddingRef::of(table)),
        },
        model: Model::Classical(result.best.clone()),
    };
    Ok((classifier, result))
}

pub fn train_textcnn(
    config: &TextCnnConfig,
    train: &[Doc],
    val: &[Doc],
    table: Option<&EmbeddingTable>,
) -> Result<(TrainedClassifier, TrainHistory)> {
    let table = match config.embedding_mode {
        EmbeddingMode::LearnedFromVocab => None,
        EmbeddingMode::PretrainedFrozen => Some(table.ok_or_else(|| {
            Error::InvalidArgument("pretrained_frozen TextCNN needs an embedding table".into())
        })?),
    };
    let (model, history) = textcnn::train(train, val, config, table)?;
    let classifier = TrainedClassifier {
        meta: TrainingMeta {
            family: "textcnn".into(),
            seed: config.seed,
            grid_point: None,
            embedding: model.embedding_ref.clone(),
        },
        model: Model::Textcnn(model),
    };
    Ok((classifier, history))
}

pub fn evaluate_classifier(c: &TrainedClassifier, docs: &[Doc], table: Option<&EmbeddingTable>) -> Result<MetricsReport> {
    let preds = docs
        .iter()
        .map(|(t, _)| c.predict_tokens(t, table).map(|p| p.label))
        .collect::<Result<Vec<_>>>()?;
    evaluate(&preds, &docs.iter().map(|(_, l)| *l).collect::<Vec<_>>())
}

pub fn evaluate_ensemble<V: Voter<[String]>>(e: &VotingEnsemble<V>, docs: &[Doc]) -> Result<MetricsReport> {
    let items: Vec<&[String]> = docs.iter().map(|(t, _)| t.as_slice()).collect();
    let preds = e.hard_vote_refs(&items)?;
    evaluate(&preds, &docs.iter().map(|(_, l)| *l).collect::<Vec<_>>())
}

/// A pipeline around `classifier` that reuses an already loaded table.
pub fn pipeline(
    name: impl Into<String>,
    classifier: TrainedClassifier,
    table: Option<Arc<EmbeddingTable>>,
    preprocess: Arc<PreprocessConfig>,
) -> Result<Pipeline> {
    let table = if classifier.needs_table() { table } else { None };
    Pipeline::new(name, classifier, table, preprocess)
}

/// The grid-search score table as CSV: one row per grid point.
pub fn grid_scores_csv(result: &GridSearchResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "point", "precision", "recall", "f1", "accuracy", "selected"])?;
    for s in &result.scores {
        let r = &s.validation;
        w.write_record([
            s.index.to_string(),
            s.point.to_string(),
            format!("{}", r.precision),
            format!("{}", r.recall),
            format!("{}", r.f1),
            format!("{}", r.accuracy),
            (s.index == result.best_index).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Validation(e.to_string()))
}
