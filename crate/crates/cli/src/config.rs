//! Run configuration, embedding resolution and content-addressed run
//! directories.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use ersn_core::classical::{default_grid, Family, HyperGrid, ParamValue};
use ersn_core::corpus::SplitSpec;
use ersn_core::embeddings::{load_text_vectors_with, EmbeddingKind, EmbeddingTable, LoadOptions};
use ersn_core::rng::DEFAULT_SEED;
use ersn_core::textcnn::TextCnnConfig;
use ersn_core::textprep::{PreprocessConfig, Steps, StopwordList};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit;

pub const CONFIG_ENV: &str = "ERSN_CONFIG";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    /// Where run directories are created. Not part of the run id.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Down-sample the majority class before splitting.
    pub balance: bool,
    pub split: SplitParts,
    pub preprocess: PreprocessSection,
    pub embeddings: BTreeMap<String, EmbeddingSource>,
    /// Per-family grid overrides: `[grids.svm] c = [0.1, 1.0]`.
    pub grids: BTreeMap<String, BTreeMap<String, Vec<ParamValue>>>,
    pub textcnn: TextCnnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            data: None,
            out_dir: PathBuf::from("runs"),
            balance: true,
            split: SplitParts::default(),
            preprocess: PreprocessSection::default(),
            embeddings: BTreeMap::new(),
            grids: BTreeMap::new(),
            textcnn: TextCnnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParts {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl Default for SplitParts {
    fn default() -> Self {
        let d = SplitSpec::default();
        SplitParts {
            train: d.train,
            val: d.val,
            test: d.test,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub steps: Steps,
    /// One word per line; the built-in English list when absent.
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSource {
    pub path: PathBuf,
    pub kind: Option<String>,
    pub dim: Option<usize>,
}

impl RunConfig {
    /// Reads `path`, else `$ERSN_CONFIG`, else the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(path) = path.map(Path::to_path_buf).or(from_env) else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        cfg.split_spec()?;
        Ok(cfg)
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let s = &self.split;
        Ok(SplitSpec::new(s.train, s.val, s.test, self.seed)?)
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let stopwords = match &self.preprocess.stopwords {
            Some(p) => StopwordList::load(p)?,
            None => StopwordList::english(),
        };
        Ok(PreprocessConfig {
            stopwords,
            steps: self.preprocess.steps,
            ..PreprocessConfig::default()
        })
    }

    /// The configured grid for `family`, or its default grid.
    pub fn grid(&self, family: Family) -> Result<HyperGrid> {
        match self.grids.get(family.as_str()) {
            None => Ok(default_grid(family)),
            Some(axes) => Ok(HyperGrid::new(
                family,
                axes.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            )?),
        }
    }

    /// Resolves an `--embedding` argument: a configured name, `name=path`,
    /// or a bare path named after its file stem.
    pub fn embedding_spec(&self, arg: &str) -> Result<EmbeddingSpec> {
        if let Some(src) = self.embeddings.get(arg) {
            return EmbeddingSpec::new(arg, src.path.clone(), src.kind.as_deref(), src.dim);
        }
        if let Some((name, path)) = arg.split_once('=') {
            if name.is_empty() || path.is_empty() {
                return Err(exit::usage(format!("malformed embedding argument {arg:?}")));
            }
            return EmbeddingSpec::new(name, PathBuf::from(path), None, None);
        }
        let path = PathBuf::from(arg);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| exit::usage(format!("cannot name embedding {arg:?}")))?;
        EmbeddingSpec::new(&name, path, None, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSpec {
    pub name: String,
    pub path: PathBuf,
    pub kind: EmbeddingKind,
    pub dim: Option<usize>,
}

impl EmbeddingSpec {
    fn new(name: &str, path: PathBuf, kind: Option<&str>, dim: Option<usize>) -> Result<Self> {
        let kind = match kind {
            Some(k) => k.parse()?,
            // names like "w2v" or "glove" identify the published tables
            None => name.parse().unwrap_or(EmbeddingKind::Custom),
        };
        Ok(EmbeddingSpec {
            name: name.to_string(),
            path,
            kind,
            dim,
        })
    }

    /// Loads the table, keeping only `vocabulary` when given.
    pub fn load(&self, vocabulary: Option<&HashSet<String>>) -> Result<Arc<EmbeddingTable>> {
        let opts = LoadOptions {
            expected_dim: self.dim,
            vocabulary,
            name: Some(self.name.clone()),
            kind: Some(self.kind),
        };
        let table = load_text_vectors_with(&self.path, &opts)
            .with_context(|| format!("loading embedding {} from {}", self.name, self.path.display()))?;
        log::info!("embedding {}: {} vectors, dim {}", self.name, table.len(), table.dim());
        Ok(Arc::new(table))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// A run directory named by the hash of its resolved configuration.
pub struct RunDir {
    pub id: String,
    pub path: PathBuf,
}

impl RunDir {
    /// Serializes `resolved`, derives the run id from it, and creates
    /// `out_dir/<id>` holding `config.toml` and `VERSION`. An existing
    /// directory is only reused with `force`.
    pub fn create<T: Serialize>(out_dir: &Path, resolved: &T, force: bool) -> Result<Self> {
        let text = toml::to_string(resolved).context("serializing resolved config")?;
        let id = sha256_hex(text.as_bytes())[..16].to_string();
        let path = out_dir.join(&id);
        if path.exists() && !force {
            return Err(exit::refusal(format!(
                "run directory {} already exists (same configuration); pass --force to overwrite",
                path.display()
            )));
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        fs::write(path.join("config.toml"), text)?;
        fs::write(path.join("VERSION"), format!("ersn {VERSION}\n"))?;
        Ok(RunDir { id, path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}
