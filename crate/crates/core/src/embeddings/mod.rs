//! Pre-trained word vectors: the text vector file format, document
//! pooling for the classical models and padded sequences for the CNN.

mod pca;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pca::{apply_pca, fit_pca, PcaTransform};

/// Which published vector set a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Word2vecSo,
    FasttextCc,
    GloveTwitter,
    Custom,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Word2vecSo => "word2vec_so",
            EmbeddingKind::FasttextCc => "fasttext_cc",
            EmbeddingKind::GloveTwitter => "glove_twitter",
            EmbeddingKind::Custom => "custom",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "word2vec_so" | "word2vec" | "w2v" => EmbeddingKind::Word2vecSo,
            "fasttext_cc" | "fasttext" | "ft" => EmbeddingKind::FasttextCc,
            "glove_twitter" | "glove" => EmbeddingKind::GloveTwitter,
            "custom" => EmbeddingKind::Custom,
            other => {
                return Err(Error::InvalidArgument(format!("unknown embedding kind {other:?}")))
            }
        })
    }
}

/// Immutable token -> vector mapping of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    name: String,
    kind: EmbeddingKind,
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates of a
    /// token are ignored.
    pub fn from_pairs<I, S>(name: impl Into<String>, kind: EmbeddingKind, dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let mut table = EmbeddingTable {
            name: name.into(),
            kind,
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (token, vector) in pairs {
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: vector.len(),
                });
            }
            table.insert(token.into(), &vector);
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: &[f64]) -> bool {
        if self.index.contains_key(&token) {
            return false;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        true
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in file order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    pub fn with_name(mut self, name: impl Into<String>, kind: EmbeddingKind) -> Self {
        self.name = name.into();
        self.kind = kind;
        self
    }

    /// Writes the text vector format with a `count dim` header. Values use
    /// the shortest representation that parses back to the same `f64`.
    pub fn write_text(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (token, vector) in self.rows() {
            out.write_all(token.as_bytes())?;
            for v in vector {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_text(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Options for [`load_text_vectors`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions<'a> {
    pub expected_dim: Option<usize>,
    /// Keep only these tokens; useful for multi-gigabyte published files.
    pub vocabulary: Option<&'a HashSet<String>>,
    pub name: Option<String>,
    pub kind: Option<EmbeddingKind>,
}

pub fn load_text_vectors(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    load_text_vectors_with(
        path,
        &LoadOptions {
            expected_dim,
            ..LoadOptions::default()
        },
    )
}

pub fn load_text_vectors_with(path: impl AsRef<Path>, opts: &LoadOptions<'_>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = opts.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    read_text_vectors(BufReader::new(file), name, opts)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_ascii_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((count, dim))
}

/// Parses `[count dim]` then `token v1 .. vd` lines.
pub fn read_text_vectors(reader: impl BufRead, name: String, opts: &LoadOptions<'_>) -> Result<EmbeddingTable> {
    let mut dim = opts.expected_dim;
    let mut declared_count = None;
    let mut built: Option<EmbeddingTable> = None;
    let mut values = Vec::new();
    let mut duplicates = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Format {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 {
            if let Some((count, header_dim)) = parse_header(&line) {
                if let Some(expected) = opts.expected_dim {
                    if expected != header_dim {
                        return Err(Error::Format {
                            line: lineno,
                            message: format!("header declares dimension {header_dim}, expected {expected}"),
                        });
                    }
                }
                dim = Some(header_dim);
                declared_count = Some(count);
                continue;
            }
        }

        let mut fields = line.split_ascii_whitespace();
        let token = fields.next().unwrap_or_default();
        values.clear();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| Error::Format {
                line: lineno,
                message: format!("non-numeric component {field:?} for token {token:?}"),
            })?;
            values.push(v);
        }
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(Error::Format {
                line: lineno,
                message: format!("token {token:?} has {} components, expected {d}", values.len()),
            });
        }
        let table = match built.as_mut() {
            Some(t) => t,
            None => built.insert(EmbeddingTable::from_pairs(
                name.clone(),
                opts.kind.unwrap_or(EmbeddingKind::Custom),
                d,
                std::iter::empty::<(String, Vec<f64>)>(),
            )?),
        };
        if opts.vocabulary.is_some_and(|v| !v.contains(token)) {
            continue;
        }
        if !table.insert(token.to_string(), &values) {
            duplicates += 1;
            log::warn!("line {lineno}: duplicate token {token:?} ignored, keeping first occurrence");
        }
    }

    let table = match built {
        Some(t) => t,
        None => {
            let d = dim.ok_or_else(|| Error::Format {
                line: 0,
                message: "empty vector file".into(),
            })?;
            EmbeddingTable::from_pairs(name, opts.kind.unwrap_or(EmbeddingKind::Custom), d, std::iter::empty::<(String, Vec<f64>)>())?
        }
    };
    if let Some(count) = declared_count {
        if opts.vocabulary.is_none() && count != table.len() + duplicates {
            log::warn!("header declares {count} vectors, file holds {}", table.len() + duplicates);
        }
    }
    Ok(table)
}

/// Mean of the in-vocabulary token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub values: Vec<f64>,
    /// Number of in-vocabulary tokens that contributed.
    pub hit_count: usize,
}

impl DocVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Arithmetic mean of the vectors of in-vocabulary tokens (with
/// multiplicity); out-of-vocabulary tokens are skipped.
pub fn doc_vector<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> DocVector {
    let mut values = vec![0.0; table.dim()];
    let mut hit_count = 0;
    for token in tokens {
        if let Some(v) = table.get(token.as_ref()) {
            for (acc, x) in values.iter_mut().zip(v) {
                *acc += x;
            }
            hit_count += 1;
        }
    }
    if hit_count > 0 {
        let n = hit_count as f64;
        values.iter_mut().for_each(|x| *x /= n);
    }
    DocVector { values, hit_count }
}

pub const DEFAULT_MAX_LEN: usize = 2000;

/// A `max_len x dim` matrix of token vectors whose rows beyond
/// `true_length` are zero. Only the leading rows are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMatrix {
    dim: usize,
    max_len: usize,
    true_length: usize,
    data: Vec<f64>,
}

impl SequenceMatrix {
    pub fn from_rows(dim: usize, max_len: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let true_length = rows.len().min(max_len);
        let mut data = Vec::with_capacity(true_length * dim);
        for row in rows.into_iter().take(max_len) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(SequenceMatrix {
            dim,
            max_len,
            true_length,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    /// Row `i`, or `None` for a zero padding row (`i >= true_length`).
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        (i < self.true_length).then(|| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// The stored (non-padding) rows, row-major.
    pub fn leading_rows(&self) -> &[f64] {
        &self.data
    }

    /// All `max_len` rows, row-major, padding included.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = self.data.clone();
        dense.resize(self.max_len * self.dim, 0.0);
        dense
    }
}

/// Maps the first `max_len` tokens to their vectors (zero for OOV tokens)
/// and zero-pads the rest.
pub fn sequence_matrix<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, max_len: usize) -> SequenceMatrix {
    let true_length = tokens.len().min(max_len);
    let dim = table.dim();
    let mut data = vec![0.0; true_length * dim];
    for (row, token) in data.chunks_exact_mut(dim).zip(tokens) {
        if let Some(v) = table.get(token.as_ref()) {
            row.copy_from_slice(v);
        }
    }
    SequenceMatrix {
        dim,
        max_len,
        true_length,
        data,
    }
}
