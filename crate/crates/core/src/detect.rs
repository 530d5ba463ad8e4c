// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact dynamic-programming changepoint detection on a concrete sequence.
//!
//! Argmin scans visit split points in ascending order and only move on a
//! strict improvement, so the smallest split wins ties.

use crate::error::{validation, Result};
use crate::model::{check_beta, CpVector, PrefixStats};

/// Optimal losses and backpointers for every `(k, n)` subproblem.
#[derive(Clone, Debug)]
pub struct DpTable {
    n: usize,
    min_seg: usize,
    /// `loss[k][n]`, `+inf` where no valid segmentation exists.
    loss: Vec<Vec<f64>>,
    /// `back[k][n]` = last changepoint of the optimal vector (0 when `k == 0`).
    back: Vec<Vec<usize>>,
}

impl DpTable {
    pub fn build(x: &[f64], k_max: usize, min_seg: usize) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(validation!("sequence too short: need N >= 2, got {n}"));
        }
        if min_seg == 0 {
            return Err(validation!("minimum segment length must be >= 1"));
        }
        if k_max == 0 || k_max > n - 1 {
            return Err(validation!("K must lie in 1..={}, got {k_max}", n - 1));
        }
        if (k_max + 1) * min_seg > n {
            return Err(validation!(
                "{k_max} changepoints with minimum segment length {min_seg} do not fit in N = {n}"
            ));
        }
        let stats = PrefixStats::new(x);
        let mut loss = vec![vec![f64::INFINITY; n + 1]; k_max + 1];
        let mut back = vec![vec![0usize; n + 1]; k_max + 1];
        for e in min_seg..=n {
            loss[0][e] = stats.cost_unchecked(1, e);
        }
        for k in 1..=k_max {
            for e in (k + 1) * min_seg..=n {
                let mut best = f64::INFINITY;
                let mut arg = 0;
                for m in k * min_seg..=e - min_seg {
                    let v = loss[k - 1][m] + stats.cost_unchecked(m + 1, e);
                    if v < best {
                        best = v;
                        arg = m;
                    }
                }
                loss[k][e] = best;
                back[k][e] = arg;
            }
        }
        Ok(Self { n, min_seg, loss, back })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn max_k(&self) -> usize {
        self.loss.len() - 1
    }

    pub fn min_segment_len(&self) -> usize {
        self.min_seg
    }

    /// Whether `(k, n)` admits a valid segmentation.
    pub fn is_feasible(&self, k: usize, n: usize) -> bool {
        k <= self.max_k() && n <= self.n && n >= (k + 1) * self.min_seg
    }

    pub fn loss(&self, k: usize, n: usize) -> f64 {
        self.loss[k][n]
    }

    pub fn last_changepoint(&self, k: usize, n: usize) -> usize {
        self.back[k][n]
    }

    /// Optimal `k`-changepoint vector for the prefix `1..=n`.
    pub fn cp_vector(&self, k: usize, n: usize) -> CpVector {
        let mut pos = vec![0; k];
        let mut end = n;
        for kk in (1..=k).rev() {
            let m = self.back[kk][end];
            pos[kk - 1] = m;
            end = m;
        }
        CpVector::from_vec_unchecked(pos)
    }
}

/// Optimal partitioning table for the penalized objective.
#[derive(Clone, Debug)]
pub struct PenalizedTable {
    beta: f64,
    min_seg: usize,
    loss: Vec<f64>,
    back: Vec<usize>,
}

impl PenalizedTable {
    pub fn build(x: &[f64], beta: f64, min_seg: usize) -> Result<Self> {
        check_beta(beta)?;
        let n = x.len();
        if n < 2 {
            return Err(validation!("sequence too short: need N >= 2, got {n}"));
        }
        if min_seg == 0 || min_seg > n {
            return Err(validation!("minimum segment length must lie in 1..={n}"));
        }
        let stats = PrefixStats::new(x);
        let mut loss = vec![f64::INFINITY; n + 1];
        let mut back = vec![0usize; n + 1];
        loss[0] = 0.0;
        for e in min_seg..=n {
            let mut best = stats.cost_unchecked(1, e);
            let mut arg = 0;
            for m in min_seg..=e.saturating_sub(min_seg) {
                if !loss[m].is_finite() {
                    continue;
                }
                let v = loss[m] + beta + stats.cost_unchecked(m + 1, e);
                if v < best {
                    best = v;
                    arg = m;
                }
            }
            loss[e] = best;
            back[e] = arg;
        }
        Ok(Self { beta, min_seg, loss, back })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn min_segment_len(&self) -> usize {
        self.min_seg
    }

    pub fn len(&self) -> usize {
        self.loss.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn loss(&self, n: usize) -> f64 {
        self.loss[n]
    }

    pub fn last_changepoint(&self, n: usize) -> usize {
        self.back[n]
    }

    pub fn cp_vector(&self, n: usize) -> CpVector {
        let mut pos = Vec::new();
        let mut end = n;
        while self.back[end] > 0 {
            end = self.back[end];
            pos.push(end);
        }
        pos.reverse();
        CpVector::from_vec_unchecked(pos)
    }
}

/// Best `K`-changepoint segmentation and its loss.
pub fn detect_fixed_k(x: &[f64], k: usize) -> Result<(CpVector, f64)> {
    detect_fixed_k_with(x, k, 1)
}

pub fn detect_fixed_k_with(x: &[f64], k: usize, min_seg: usize) -> Result<(CpVector, f64)> {
    let table = DpTable::build(x, k, min_seg)?;
    let n = x.len();
    Ok((table.cp_vector(k, n), table.loss(k, n)))
}

/// Best segmentation under the penalty `beta` per changepoint, and its penalized loss.
pub fn detect_penalized(x: &[f64], beta: f64) -> Result<(CpVector, f64)> {
    detect_penalized_with(x, beta, 1)
}

pub fn detect_penalized_with(x: &[f64], beta: f64, min_seg: usize) -> Result<(CpVector, f64)> {
    let table = PenalizedTable::build(x, beta, min_seg)?;
    let n = x.len();
    Ok((table.cp_vector(n), table.loss(n)))
}

/// Default penalty `2 sigma^2 log N`.
pub fn default_beta(sigma2: f64, n: usize) -> f64 {
    2.0 * sigma2 * (n as f64).ln()
}

/// Difference-based noise variance estimate, robust to mean shifts:
/// `(1.4826 * MAD(diff(x)) / sqrt 2)^2`.
pub fn mad_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mut d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let s = 1.4826 * mad / std::f64::consts::SQRT_2;
    s * s
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{loss_fixed, segment_cost};

    #[test]
    fn fixed_k_examples() {
        let (t, l) = detect_fixed_k(&[0.0, 0.0, 10.0, 10.0], 1).unwrap();
        assert_eq!(t.positions(), &[2]);
        assert_eq!(l, 0.0);
        let (t, l) = detect_fixed_k(&[5.0; 4], 1).unwrap();
        assert_eq!(t.positions(), &[1]);
        assert_eq!(l, 0.0);
        let (t, l) = detect_fixed_k(&[0.0, 0.0, 10.0, 10.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(t.positions(), &[2, 4]);
        assert_eq!(l, 0.0);
        assert!(detect_fixed_k(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(detect_fixed_k(&[1.0, 2.0, 3.0], 0).is_err());
    }

    #[test]
    fn penalized_examples() {
        let x = [0.0, 0.0, 10.0, 10.0];
        let (t, l) = detect_penalized(&x, 1000.0).unwrap();
        assert!(t.is_empty());
        assert_eq!(l, 100.0);
        let (t, l) = detect_penalized(&x, 0.1).unwrap();
        assert_eq!(t.positions(), &[2]);
        assert!((l - 0.1).abs() < 1e-12);
        let (t, l) = detect_penalized(&[0.0; 4], 0.5).unwrap();
        assert!(t.is_empty());
        assert_eq!(l, 0.0);
        assert!(detect_penalized(&x, -1.0).is_err());
    }

    #[test]
    fn table_invariants() {
        let x: Vec<f64> = (0..15).map(|i| ((i * 7919) % 13) as f64 * 0.3).collect();
        let t = DpTable::build(&x, 4, 1).unwrap();
        for n in 1..=15 {
            assert!((t.loss(0, n) - segment_cost(&x, 1, n).unwrap()).abs() < 1e-9);
            for k in 1..=4 {
                if !t.is_feasible(k, n) {
                    continue;
                }
                assert!(t.loss(k, n) <= t.loss(k - 1, n) + 1e-9);
                // Bellman consistency.
                let best = (k..n)
                    .map(|m| t.loss(k - 1, m) + segment_cost(&x, m + 1, n).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!((t.loss(k, n) - best).abs() < 1e-9);
                let tau = t.cp_vector(k, n);
                assert_eq!(tau.dim(), k);
                assert!((loss_fixed(&x[..n], &tau).unwrap() - t.loss(k, n)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn min_segment_length_is_respected() {
        let x = [0.0, 9.0, 0.0, 0.0, 0.0, 0.0];
        let (t, _) = detect_fixed_k_with(&x, 1, 2).unwrap();
        assert!(t.positions()[0] >= 2 && t.positions()[0] <= 4);
        let (t, _) = detect_penalized_with(&x, 0.01, 2).unwrap();
        for (s, e) in t.segments(6) {
            assert!(e + 1 - s >= 2);
        }
        assert!(detect_fixed_k_with(&x, 3, 2).is_err());
    }

    #[test]
    fn mad_variance_is_scale_equivariant() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert!((mad_variance(&y) - 9.0 * mad_variance(&x)).abs() < 1e-9);
    }
}
