// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sequences, covariance models, changepoint vectors and exact segment costs.
//!
//! Positions are 1-based throughout the public API: a changepoint at `t`
//! closes the segment ending at `x_t`, and segments are inclusive ranges
//! `s..=e` with `1 <= s <= e <= N`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

const SYMMETRY_RTOL: f64 = 1e-9;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated prefix sums of a vector, centered on its global mean.
///
/// Segment costs are translation invariant, so centering costs nothing and
/// keeps `sum(x^2) - sum(x)^2 / len` away from catastrophic cancellation.
#[derive(Clone, Debug)]
pub struct PrefixStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl PrefixStats {
    pub fn new(x: &[f64]) -> Self {
        let center = mean(x);
        let mut s = CompensatedSum::default();
        let mut s2 = CompensatedSum::default();
        let mut sum = Vec::with_capacity(x.len() + 1);
        let mut sum_sq = Vec::with_capacity(x.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &v in x {
            let c = v - center;
            s.add(c);
            s2.add(c * c);
            sum.push(s.value());
            sum_sq.push(s2.value());
        }
        Self { sum, sum_sq }
    }

    pub fn len(&self) -> usize {
        self.sum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cost of the 1-based inclusive segment `s..=e`; the caller guarantees the range.
    pub(crate) fn cost_unchecked(&self, s: usize, e: usize) -> f64 {
        let len = (e + 1 - s) as f64;
        let sx = self.sum[e] - self.sum[s - 1];
        let sxx = self.sum_sq[e] - self.sum_sq[s - 1];
        (sxx - sx * sx / len).max(0.0)
    }

    pub fn cost(&self, s: usize, e: usize) -> Result<f64> {
        check_segment(s, e, self.len())?;
        Ok(self.cost_unchecked(s, e))
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut s = CompensatedSum::default();
    for &v in x {
        s.add(v);
    }
    s.value() / x.len() as f64
}

pub(crate) fn check_segment(s: usize, e: usize, n: usize) -> Result<()> {
    if s < 1 || s > e || e > n {
        return Err(Error::Index(format!(
            "segment {s}..={e} outside 1..={n}"
        )));
    }
    Ok(())
}

/// Sum of squared deviations from the segment mean over `x[s..=e]` (1-based).
pub fn segment_cost(x: &[f64], s: usize, e: usize) -> Result<f64> {
    check_segment(s, e, x.len())?;
    let seg = &x[s - 1..e];
    let m = mean(seg);
    let mut acc = CompensatedSum::default();
    for &v in seg {
        acc.add((v - m) * (v - m));
    }
    Ok(acc.value())
}

/// Strictly increasing changepoint positions in `1..=N-1`.
///
/// The implicit endpoints are 0 and N; the empty vector is a valid
/// segmentation with a single segment. Ordering is lexicographic.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CpVector(Vec<usize>);

impl CpVector {
    pub fn new(positions: Vec<usize>, n: usize) -> Result<Self> {
        let tau = Self(positions);
        tau.validate(n)?;
        Ok(tau)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub(crate) fn from_vec_unchecked(positions: Vec<usize>) -> Self {
        Self(positions)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut prev = 0usize;
        for &p in &self.0 {
            if p <= prev || p >= n {
                return Err(validation!(
                    "changepoints {:?} must be strictly increasing within 1..={}",
                    self.0,
                    n.saturating_sub(1)
                ));
            }
            prev = p;
        }
        Ok(())
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Appends a changepoint; `m` must exceed every current position.
    pub fn concat(&self, m: usize) -> Self {
        debug_assert!(self.last().is_none_or(|l| l < m));
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(m);
        Self(v)
    }

    /// Inclusive 1-based `(start, end)` of each of the `dim + 1` segments of `1..=n`.
    pub fn segments(&self, n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.0.iter().copied());
        let ends = self.0.iter().copied().chain(std::iter::once(n));
        starts.zip(ends).map(|(a, b)| (a + 1, b))
    }
}

impl fmt::Display for CpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl From<CpVector> for Vec<usize> {
    fn from(v: CpVector) -> Self {
        v.0
    }
}

/// Unpenalized loss: sum of segment costs of the segmentation induced by `tau`.
pub fn loss_fixed(x: &[f64], tau: &CpVector) -> Result<f64> {
    tau.validate(x.len())?;
    let mut acc = CompensatedSum::default();
    for (s, e) in tau.segments(x.len()) {
        acc.add(segment_cost(x, s, e)?);
    }
    Ok(acc.value())
}

pub fn loss_penalized(x: &[f64], tau: &CpVector, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(loss_fixed(x, tau)? + beta * tau.dim() as f64)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(validation!("penalty beta must be finite and >= 0, got {beta}"));
    }
    Ok(())
}

/// Row-major dense symmetric matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(validation!(
                    "covariance row {} has {} entries, expected {n}",
                    i + 1,
                    r.len()
                ));
            }
            data.extend(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(validation!("covariance has non-finite entries"));
        }
        let max_diag = (0..n).map(|i| self.get(i, i)).fold(0.0_f64, f64::max);
        for i in 0..n {
            if self.get(i, i) <= 0.0 {
                return Err(validation!("covariance diagonal entry {} is not positive", i + 1));
            }
            for j in 0..i {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if (a - b).abs() > SYMMETRY_RTOL * max_diag {
                    return Err(validation!(
                        "covariance is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
        // Cholesky to confirm positive definiteness.
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 {
                return Err(validation!("covariance is not positive definite"));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(())
    }
}

/// Covariance of the observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Covariance {
    Identity,
    ScaledIdentity { sigma2: f64 },
    /// `sigma2 * xi^|i-j|`.
    Geometric { sigma2: f64, xi: f64 },
    Dense(DenseMatrix),
}

impl Covariance {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Covariance::Identity => Ok(()),
            Covariance::ScaledIdentity { sigma2 } => {
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(validation!("variance must be positive, got {sigma2}"));
                }
                Ok(())
            }
            Covariance::Geometric { sigma2, xi } => {
                if !(*sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(validation!("variance must be positive, got {sigma2}"));
                }
                if !(0.0..1.0).contains(xi) {
                    return Err(validation!("correlation xi must lie in [0, 1), got {xi}"));
                }
                Ok(())
            }
            Covariance::Dense(m) => {
                if m.dim() != n {
                    return Err(validation!(
                        "covariance is {0}x{0} but the sequence has length {n}",
                        m.dim()
                    ));
                }
                m.validate()
            }
        }
    }

    /// `Sigma v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Covariance::Identity => v.to_vec(),
            Covariance::ScaledIdentity { sigma2 } => v.iter().map(|x| x * sigma2).collect(),
            Covariance::Geometric { sigma2, xi } => {
                // Forward and backward AR(1) sweeps; the diagonal is counted twice.
                let n = v.len();
                let mut fwd = vec![0.0; n];
                let mut acc = 0.0;
                for i in 0..n {
                    acc = acc * xi + v[i];
                    fwd[i] = acc;
                }
                let mut out = vec![0.0; n];
                acc = 0.0;
                for i in (0..n).rev() {
                    acc = acc * xi + v[i];
                    out[i] = sigma2 * (fwd[i] + acc - v[i]);
                }
                out
            }
            Covariance::Dense(m) => (0..m.dim())
                .map(|i| {
                    let mut s = CompensatedSum::default();
                    for (j, vj) in v.iter().enumerate() {
                        s.add(m.get(i, j) * vj);
                    }
                    s.value()
                })
                .collect(),
        }
    }

    /// `v' Sigma v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let sv = self.apply(v);
        let mut s = CompensatedSum::default();
        for (a, b) in v.iter().zip(&sv) {
            s.add(a * b);
        }
        s.value()
    }

    /// Mean of the diagonal, used for default penalties.
    pub fn mean_variance(&self, n: usize) -> f64 {
        match self {
            Covariance::Identity => 1.0,
            Covariance::ScaledIdentity { sigma2 } | Covariance::Geometric { sigma2, .. } => *sigma2,
            Covariance::Dense(m) => (0..m.dim()).map(|i| m.get(i, i)).sum::<f64>() / n.max(1) as f64,
        }
    }
}

/// Observed data together with its noise covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSequence {
    values: Vec<f64>,
    covariance: Covariance,
}

impl ObservedSequence {
    pub fn new(values: Vec<f64>, covariance: Covariance) -> Result<Self> {
        if values.len() < 2 {
            return Err(validation!("sequence too short: need N >= 2, got {}", values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(validation!("value at position {} is not finite", i + 1));
        }
        covariance.validate(values.len())?;
        Ok(Self { values, covariance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The line `x(z) = a + b z` through data space, with prefix sums for
/// constant-time segment aggregates.
#[derive(Clone, Debug)]
pub struct LineEmbedding {
    a: Vec<f64>,
    b: Vec<f64>,
    sa: Vec<f64>,
    sb: Vec<f64>,
    saa: Vec<f64>,
    sbb: Vec<f64>,
    sab: Vec<f64>,
}

impl LineEmbedding {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(validation!(
                "line direction has length {} but offset has length {}",
                b.len(),
                a.len()
            ));
        }
        if a.is_empty() {
            return Err(validation!("line must have positive length"));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(validation!("line coefficients must be finite"));
        }
        // Segment quadratics are invariant to shifting a or b by a constant.
        let (ca, cb) = (mean(&a), mean(&b));
        let n = a.len();
        let mut acc = [CompensatedSum::default(); 5];
        let mut sums: [Vec<f64>; 5] = std::array::from_fn(|_| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(0.0);
            v
        });
        for (&ai, &bi) in a.iter().zip(&b) {
            let (x, y) = (ai - ca, bi - cb);
            for (k, term) in [x, y, x * x, y * y, x * y].into_iter().enumerate() {
                acc[k].add(term);
                sums[k].push(acc[k].value());
            }
        }
        let [sa, sb, saa, sbb, sab] = sums;
        Ok(Self { a, b, sa, sb, saa, sbb, sab })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn point(&self, z: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + b * z).collect()
    }

    /// Segment sums `(Sa, Sb, Saa, Sbb, Sab)` of the centered line over `s..=e`.
    pub(crate) fn segment_sums(&self, s: usize, e: usize) -> [f64; 5] {
        let d = |v: &[f64]| v[e] - v[s - 1];
        [d(&self.sa), d(&self.sb), d(&self.saa), d(&self.sbb), d(&self.sab)]
    }
}
