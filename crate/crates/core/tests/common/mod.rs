//! Shared test helpers: brute-force oracles and synthetic data builders.
#![allow(dead_code)]

use ersn_core::embeddings::{EmbeddingKind, EmbeddingTable};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn table_from_rows(rows: &[Vec<f64>]) -> EmbeddingTable {
    EmbeddingTable::from_pairs(
        "oracle",
        EmbeddingKind::Custom,
        rows[0].len(),
        rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone())),
    )
    .unwrap()
}

/// Dense eigendecomposition of the population covariance, eigenpairs
/// sorted by descending eigenvalue.
pub fn brute_force_eigen(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// `n` points in `d` dimensions whose covariance has a well separated
/// geometric spectrum `scale^k`, rotated by a random orthonormal basis.
pub fn spread_table(n: usize, d: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let basis = random_orthonormal(d, d, &mut r);
    (0..n)
        .map(|_| {
            let mut row = vec![0.0; d];
            for (k, b) in basis.iter().enumerate() {
                let coef = r.random_range(-1.0..1.0) * scale.powi(k as i32);
                row.iter_mut().zip(b).for_each(|(x, y)| *x += coef * y);
            }
            row.iter_mut().for_each(|x| *x += 0.25);
            row
        })
        .collect()
}

/// `rank` random orthonormal vectors of length `d` (Gram-Schmidt).
pub fn random_orthonormal(rank: usize, d: usize, r: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < rank {
        let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        for b in &out {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
    }
    out
}

/// Points lying in a `rank`-dimensional affine subspace of R^d.
pub fn low_rank_table(n: usize, d: usize, rank: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let basis = random_orthonormal(rank, d, &mut r);
    let offset: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
    (0..n)
        .map(|_| {
            let mut row = offset.clone();
            for (k, b) in basis.iter().enumerate() {
                let coef = r.random_range(-1.0..1.0) * (k + 1) as f64;
                row.iter_mut().zip(b).for_each(|(x, y)| *x += coef * y);
            }
            row
        })
        .collect()
}

pub fn max_abs_diff_up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}
