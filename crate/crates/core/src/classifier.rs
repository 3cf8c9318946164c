//! Trained models of any family, their metadata, and the JSON bundle
//! format used to ship them between commands.
//!
//! A bundle is one JSON object:
//!
//! ```json
//! { "format": "ersn-model", "version": 1,
//!   "meta": { "family": "svm", "seed": 42, "grid_point": {"c": 1.0},
//!             "embedding": {"name": "w2v", "kind": "word2vec_so", "dim": 200} },
//!   "model": { "classical": { "family": "svm", "weights": [...], ... } } }
//! ```
//!
//! Weights are stored as plain float arrays. Embedding tables are not
//! embedded; the `embedding` reference says which table to load.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalModel, GridPoint};
use crate::corpus::Label;
use crate::embeddings::{doc_vector, EmbeddingTable};
use crate::error::{Error, Result};
use crate::textcnn::{EmbeddingRef, TextCnnModel};
use crate::textprep::{preprocess, PreprocessConfig};

pub const BUNDLE_FORMAT: &str = "ersn-model";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Classical(ClassicalModel),
    Textcnn(TextCnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// `svm`, `logreg`, `nb`, `dt`, `knn` or `textcnn`.
    pub family: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_point: Option<GridPoint>,
    /// The table features are computed from; absent for vocabulary-trained
    /// TextCNN models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub meta: TrainingMeta,
    pub model: Model,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Larger means more violation-like. SVM: signed margin; LR and TextCNN:
    /// P(violation); NB: log-odds; DT and kNN: violation share.
    pub score: f64,
}

impl TrainedClassifier {
    /// Whether prediction needs an embedding table.
    pub fn needs_table(&self) -> bool {
        self.meta.embedding.is_some()
    }

    fn check_table(&self, table: Option<&EmbeddingTable>) -> Result<()> {
        if let (Some(r), Some(t)) = (&self.meta.embedding, table) {
            if r.dim != t.dim() {
                return Err(Error::DimensionMismatch {
                    expected: r.dim,
                    actual: t.dim(),
                });
            }
        }
        Ok(())
    }

    /// Classifies an already preprocessed token list.
    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S], table: Option<&EmbeddingTable>) -> Result<Prediction> {
        self.check_table(table)?;
        match &self.model {
            Model::Classical(m) => {
                let table = table.ok_or_else(|| {
                    Error::InvalidArgument(format!("{} model needs its embedding table", self.meta.family))
                })?;
                self.predict_vector(&doc_vector(tokens, table).values)
                    .map_err(|e| e.context(format!("{} model", m.family())))
            }
            Model::Textcnn(m) => {
                let (label, probs) = m.predict_tokens(tokens, table)?;
                Ok(Prediction {
                    label,
                    score: probs[0],
                })
            }
        }
    }

    /// Classifies a document vector (classical models only).
    pub fn predict_vector(&self, x: &[f64]) -> Result<Prediction> {
        match &self.model {
            Model::Classical(m) => Ok(Prediction {
                label: m.predict(x)?,
                score: m.score(x)?,
            }),
            Model::Textcnn(_) => Err(Error::InvalidArgument(
                "TextCNN classifies token sequences, not document vectors".into(),
            )),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    #[serde(flatten)]
    classifier: TrainedClassifier,
}

pub fn bundle_to_json(c: &TrainedClassifier) -> Result<String> {
    let env = Envelope {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        classifier: c.clone(),
    };
    Ok(serde_json::to_string(&env)?)
}

pub fn bundle_from_json(text: &str) -> Result<TrainedClassifier> {
    let env: Envelope = serde_json::from_str(text)?;
    if env.format != BUNDLE_FORMAT {
        return Err(Error::Validation(format!("not a model bundle (format {:?})", env.format)));
    }
    if env.version != BUNDLE_VERSION {
        return Err(Error::Validation(format!(
            "unsupported bundle version {} (expected {BUNDLE_VERSION})",
            env.version
        )));
    }
    Ok(env.classifier)
}

pub fn save_bundle(c: &TrainedClassifier, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle_to_json(c)?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<TrainedClassifier> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    bundle_from_json(&text).map_err(|e| e.context(path.display().to_string()))
}

/// A classifier bundled with the preprocessing and table it expects, so
/// it can label raw comment text.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub name: String,
    pub classifier: Arc<TrainedClassifier>,
    pub table: Option<Arc<EmbeddingTable>>,
    pub preprocess: Arc<PreprocessConfig>,
}

impl Pipeline {
    pub fn new(
        name: impl Into<String>,
        classifier: TrainedClassifier,
        table: Option<Arc<EmbeddingTable>>,
        preprocess: Arc<PreprocessConfig>,
    ) -> Result<Self> {
        if classifier.needs_table() && table.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} model needs its embedding table",
                classifier.meta.family
            )));
        }
        classifier.check_table(table.as_deref())?;
        Ok(Pipeline {
            name: name.into(),
            classifier: Arc::new(classifier),
            table,
            preprocess,
        })
    }

    pub fn predict_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Prediction> {
        self.classifier.predict_tokens(tokens, self.table.as_deref())
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        self.predict_tokens(&preprocess(text, &self.preprocess))
    }
}
