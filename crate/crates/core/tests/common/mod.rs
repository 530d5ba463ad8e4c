// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exhaustive reference implementations shared by the integration tests.

#![allow(dead_code)]

use optseg::{contrast_vector, line_embedding, loss_fixed, loss_penalized, Covariance, CpVector, LineEmbedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Every strictly increasing `k`-subset of `1..n`, in lexicographic order.
pub fn fixed_k_vectors(n: usize, k: usize) -> Vec<CpVector> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<CpVector>) {
        if cur.len() == k {
            out.push(CpVector::new(cur.clone(), n).unwrap());
            return;
        }
        for p in start..n {
            cur.push(p);
            rec(p + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, k, &mut Vec::new(), &mut out);
    out
}

/// All `2^(n-1)` changepoint vectors.
pub fn all_vectors(n: usize) -> Vec<CpVector> {
    (0..1usize << (n - 1))
        .map(|mask| {
            let pos: Vec<usize> = (1..n).filter(|p| mask & (1 << (p - 1)) != 0).collect();
            CpVector::new(pos, n).unwrap()
        })
        .collect()
}

/// Minimum loss over `vectors` and the lexicographically smallest minimizer
/// within `tol` of it.
pub fn brute_min(vectors: &[CpVector], loss: impl Fn(&CpVector) -> f64, tol: f64) -> (CpVector, f64) {
    let losses: Vec<f64> = vectors.iter().map(&loss).collect();
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let idx = losses.iter().position(|&l| l <= best + tol).unwrap();
    (vectors[idx].clone(), best)
}

pub fn brute_fixed(x: &[f64], k: usize) -> (CpVector, f64) {
    brute_min(&fixed_k_vectors(x.len(), k), |t| loss_fixed(x, t).unwrap(), 0.0)
}

pub fn brute_penalized(x: &[f64], beta: f64) -> (CpVector, f64) {
    brute_min(&all_vectors(x.len()), |t| loss_penalized(x, t, beta).unwrap(), 0.0)
}

/// Line through random data along the contrast of a random changepoint of a
/// random `k`-vector, as used by the inference pipeline.
pub fn random_line(rng: &mut ChaCha8Rng, n: usize, k: usize) -> LineEmbedding {
    let mut x = normals(rng, n);
    // Occasional mean shifts so the path is not always null-like.
    if rng.random_bool(0.5) {
        let at = rng.random_range(1..n);
        let shift = rng.random_range(-4.0..4.0);
        x[at..].iter_mut().for_each(|v| *v += shift);
    }
    let tau = fixed_k_vectors(n, k);
    let tau = &tau[rng.random_range(0..tau.len())];
    let j = rng.random_range(1..=k);
    let eta = contrast_vector(tau, j, n).unwrap();
    line_embedding(&x, &Covariance::Identity, &eta).unwrap().0
}

pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}
