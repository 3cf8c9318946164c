//! Principal component projection of an embedding table.
//!
//! Components come from the covariance matrix of the mean-centred vectors
//! by power iteration with deflation, re-orthogonalising against the
//! components already found on every iteration.

use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub source_dim: usize,
    pub target_dim: usize,
    pub mean: Vec<f64>,
    /// `target_dim x source_dim`, row-major, one unit component per row.
    pub components: Vec<f64>,
    /// Covariance eigenvalue of each component, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: f64,
}

impl PcaTransform {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.source_dim..(i + 1) * self.source_dim]
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.source_dim {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim,
                actual: v.len(),
            });
        }
        Ok((0..self.target_dim)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
}

fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(n)) {
        *o = dot(row, v);
    }
}

/// Mean and population covariance (`dim x dim`) of the table's vectors.
fn covariance(table: &EmbeddingTable) -> (Vec<f64>, Vec<f64>) {
    let dim = table.dim();
    let n = table.len() as f64;
    let mut mean = vec![0.0; dim];
    for (_, v) in table.rows() {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = vec![0.0; dim * dim];
    let mut centred = vec![0.0; dim];
    for (_, v) in table.rows() {
        centred.iter_mut().zip(v.iter().zip(&mean)).for_each(|(c, (x, m))| *c = x - m);
        for i in 0..dim {
            let ci = centred[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * dim..(i + 1) * dim];
            for j in i..dim {
                row[j] += ci * centred[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / n;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fit_pca(table: &EmbeddingTable, target_dim: usize) -> Result<PcaTransform> {
    let dim = table.dim();
    if target_dim == 0 || target_dim >= dim {
        return Err(Error::InvalidArgument(format!(
            "target dimension must lie in [1, {}), got {target_dim}",
            dim
        )));
    }
    if table.len() < target_dim {
        return Err(Error::InvalidArgument(format!(
            "vocabulary of {} vectors is smaller than target dimension {target_dim}",
            table.len()
        )));
    }

    let (mean, mut residual) = covariance(table);
    let trace: f64 = (0..dim).map(|i| residual[i * dim + i]).sum();
    let negligible = trace * 1e-14;

    let mut rng = rng::seeded(0x9ca_5eed);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(target_dim);
    let mut eigenvalues = Vec::with_capacity(target_dim);
    let mut next = vec![0.0; dim];

    for _ in 0..target_dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &found);
        normalize(&mut v);

        for _ in 0..MAX_ITERATIONS {
            mat_vec(&residual, &v, &mut next);
            orthogonalize(&mut next, &found);
            if dot(&v, &next) <= negligible {
                // null space: keep the orthonormal start vector
                break;
            }
            normalize(&mut next);
            let change: f64 = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            std::mem::swap(&mut v, &mut next);
            if change < TOLERANCE {
                break;
            }
        }
        orthogonalize(&mut v, &found);
        normalize(&mut v);

        mat_vec(&residual, &v, &mut next);
        let lambda = dot(&v, &next).max(0.0);
        for i in 0..dim {
            for j in 0..dim {
                residual[i * dim + j] -= lambda * v[i] * v[j];
            }
        }
        eigenvalues.push(lambda);
        found.push(v);
    }

    let mut components = Vec::with_capacity(target_dim * dim);
    for mut v in found {
        canonical_sign(&mut v);
        components.extend(v);
    }
    let explained_variance_ratio = if trace > 0.0 {
        (eigenvalues.iter().sum::<f64>() / trace).min(1.0)
    } else {
        1.0
    };
    Ok(PcaTransform {
        source_dim: dim,
        target_dim,
        mean,
        components,
        eigenvalues,
        explained_variance_ratio,
    })
}

/// Projects every vector of `table`; the vocabulary and its order are kept.
pub fn apply_pca(transform: &PcaTransform, table: &EmbeddingTable) -> Result<EmbeddingTable> {
    if table.dim() != transform.source_dim {
        return Err(Error::DimensionMismatch {
            expected: transform.source_dim,
            actual: table.dim(),
        });
    }
    let mut out = EmbeddingTable::from_pairs(
        format!("{}-pca{}", table.name(), transform.target_dim),
        table.kind(),
        transform.target_dim,
        std::iter::empty::<(String, Vec<f64>)>(),
    )?;
    for (token, v) in table.rows() {
        out.insert(token.to_string(), &transform.project(v)?);
    }
    Ok(out)
}

impl EmbeddingTable {
    /// Convenience wrapper: fit on this table and project it.
    pub fn reduce(&self, target_dim: usize) -> Result<(EmbeddingTable, PcaTransform)> {
        let t = fit_pca(self, target_dim)?;
        let reduced = apply_pca(&t, self)?;
        Ok((reduced.with_name(self.name().to_string(), self.kind()), t))
    }
}
