// SPDX-License-Identifier: MIT OR Apache-2.0

//! Selective inference for detected changepoints.
//!
//! For each detected changepoint the statistic is the difference of the means
//! of its two adjacent segments. Conditioning on the detection output and on
//! the component of the data orthogonal to the contrast restricts the data to
//! a line, along which the parametric DP gives the exact set of `z` that
//! reproduce the detection. The p-value is then a truncated-normal tail.

mod normal;
mod oc;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use normal::{log_interval_mass, log_upper_tail, naive_p, std_normal_cdf, truncated_gaussian_two_sided_p};
pub use oc::{oc_truncation_region, oc_truncation_region_penalized};

use crate::detect::{DpTable, PenalizedTable};
use crate::envelope::PiecewiseSolution;
use crate::error::{validation, Error, Result};
use crate::intervals::IntervalSet;
use crate::model::{Covariance, CpVector, LineEmbedding, ObservedSequence};
use crate::paradp::{para_dp_fixed_k, para_dp_penalized, ParaDpOptions, ParametricPath};

/// How the truncation region is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Condition on the detected vector only.
    #[serde(rename = "full")]
    Full,
    /// Condition on every intermediate DP decision.
    #[serde(rename = "oc")]
    OverConditioned,
    /// No conditioning; the classical test.
    #[serde(rename = "naive")]
    Naive,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::OverConditioned => "oc",
            Method::Naive => "naive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Method::Full),
            "oc" | "over-conditioned" => Ok(Method::OverConditioned),
            "naive" => Ok(Method::Naive),
            _ => Err(validation!("unknown method {s:?}; expected full, oc or naive")),
        }
    }
}

/// Which detection problem is solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    FixedK(usize),
    Penalized(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferenceOptions {
    pub selection: Selection,
    pub method: Method,
    pub min_segment_len: usize,
    /// Candidate pruning inside the parametric DP. Results do not depend on it.
    pub pruning: bool,
}

impl InferenceOptions {
    pub fn fixed_k(k: usize) -> Self {
        Self { selection: Selection::FixedK(k), method: Method::Full, min_segment_len: 1, pruning: true }
    }

    pub fn penalized(beta: f64) -> Self {
        Self { selection: Selection::Penalized(beta), ..Self::fixed_k(1) }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn para_dp(&self) -> ParaDpOptions {
        ParaDpOptions { pruning: self.pruning, min_segment_len: self.min_segment_len, retain_cells: false }
    }
}

/// Segment-mean-difference contrast for one detected changepoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Contrast {
    pub eta: Vec<f64>,
    /// `eta' Sigma eta`.
    pub variance: f64,
    /// 1-based index of the tested changepoint within the detected vector.
    pub k_index: usize,
}

impl Contrast {
    pub fn new(tau: &CpVector, k: usize, n: usize, cov: &Covariance) -> Result<Self> {
        cov.validate(n)?;
        let eta = contrast_vector(tau, k, n)?;
        let variance = cov.quad_form(&eta);
        Ok(Self { eta, variance, k_index: k })
    }
}

/// `+1/len` on the segment ending at `tau_k`, `-1/len` on the next one, zero elsewhere.
pub fn contrast_vector(tau: &CpVector, k: usize, n: usize) -> Result<Vec<f64>> {
    tau.validate(n)?;
    if k == 0 || k > tau.dim() {
        return Err(validation!("changepoint index {k} out of range 1..={}", tau.dim()));
    }
    let p = tau.positions();
    let start = if k == 1 { 0 } else { p[k - 2] };
    let mid = p[k - 1];
    let end = if k == tau.dim() { n } else { p[k] };
    let mut eta = vec![0.0; n];
    let (w1, w2) = (1.0 / (mid - start) as f64, 1.0 / (end - mid) as f64);
    eta[start..mid].fill(w1);
    eta[mid..end].fill(-w2);
    Ok(eta)
}

/// Line `a + b z` through `x_obs` along `Sigma eta`, with `z_obs = eta' x_obs`
/// and the variance `eta' Sigma eta`.
pub fn line_embedding(x_obs: &[f64], cov: &Covariance, eta: &[f64]) -> Result<(LineEmbedding, f64, f64)> {
    if x_obs.len() != eta.len() {
        return Err(validation!("contrast has length {} but data has length {}", eta.len(), x_obs.len()));
    }
    cov.validate(x_obs.len())?;
    let s_eta = cov.apply(eta);
    let variance: f64 = eta.iter().zip(&s_eta).map(|(e, s)| e * s).sum();
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(validation!("contrast variance must be positive, got {variance}"));
    }
    let z_obs: f64 = eta.iter().zip(x_obs).map(|(e, x)| e * x).sum();
    let b: Vec<f64> = s_eta.iter().map(|s| s / variance).collect();
    let a: Vec<f64> = x_obs.iter().zip(&b).map(|(x, bi)| x - bi * z_obs).collect();
    Ok((LineEmbedding::new(a, b)?, z_obs, variance))
}

/// Union of the pieces of `path` equal to `target`.
pub fn truncation_region<I: Copy + PartialEq>(path: &PiecewiseSolution<I>, target: I) -> Result<IntervalSet> {
    let selected: Vec<(f64, f64)> =
        path.intervals().filter(|&(_, _, p)| p == target).map(|(lo, hi, _)| (lo, hi)).collect();
    if selected.is_empty() {
        return Err(Error::EmptyRegion("the detected vector is optimal nowhere on the line".into()));
    }
    IntervalSet::new(selected)
}

/// Set of `z` on which the parametric path selects `tau`.
pub fn selection_region(path: &ParametricPath, tau: &CpVector) -> Result<IntervalSet> {
    let Some(idx) = path.vectors().iter().position(|v| v == tau) else {
        return Err(Error::EmptyRegion(format!("detected vector {tau} is optimal nowhere on the line")));
    };
    truncation_region(path.solution(), idx)
}

/// Largest unbiased within-segment variance over segments of length >= 2.
pub fn estimate_variance_max_segment(x: &[f64], tau: &CpVector) -> Result<f64> {
    tau.validate(x.len())?;
    let mut best: Option<f64> = None;
    for (s, e) in tau.segments(x.len()) {
        let len = e + 1 - s;
        if len < 2 {
            continue;
        }
        let v = crate::model::segment_cost(x, s, e)? / (len - 1) as f64;
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or_else(|| Error::Estimation("every segment has length 1; variance is not estimable".into()))
}

/// Per-test level `alpha / k`.
pub fn bonferroni_adjust(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(validation!("alpha must lie in (0, 1), got {alpha}"));
    }
    if k == 0 {
        return Err(validation!("number of tests must be positive"));
    }
    Ok(alpha / k as f64)
}

#[derive(Clone, Debug)]
enum Table {
    FixedK(DpTable),
    Penalized(PenalizedTable),
}

/// Output of the detection step, with the DP table kept for over-conditioning.
#[derive(Clone, Debug)]
pub struct Detection {
    pub tau: CpVector,
    /// Objective value at the optimum (penalized objective in penalized mode).
    pub loss: f64,
    table: Table,
}

impl Detection {
    pub fn run(x: &[f64], selection: Selection, min_segment_len: usize) -> Result<Self> {
        let n = x.len();
        match selection {
            Selection::FixedK(k) => {
                let table = DpTable::build(x, k, min_segment_len)?;
                Ok(Self { tau: table.cp_vector(k, n), loss: table.loss(k, n), table: Table::FixedK(table) })
            }
            Selection::Penalized(beta) => {
                let table = PenalizedTable::build(x, beta, min_segment_len)?;
                Ok(Self { tau: table.cp_vector(n), loss: table.loss(n), table: Table::Penalized(table) })
            }
        }
    }
}

/// Inference outcome for one detected changepoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub cp_position: usize,
    pub k_index: usize,
    pub z_obs: f64,
    pub variance: f64,
    pub naive_p: f64,
    /// `None` for the naive method, or when the region's probability underflows.
    pub selective_p: Option<f64>,
    pub truncation: IntervalSet,
    pub method: Method,
    /// Why `selective_p` could not be computed.
    pub diagnostic: Option<String>,
}

impl TestResult {
    /// The p-value the method rejects on.
    pub fn p_value(&self) -> Option<f64> {
        match self.method {
            Method::Naive => Some(self.naive_p),
            _ => self.selective_p,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.p_value().is_none()
    }
}

/// Test the `k`-th detected changepoint.
pub fn test_changepoint(
    seq: &ObservedSequence,
    detection: &Detection,
    k: usize,
    opts: &InferenceOptions,
) -> Result<TestResult> {
    let x = seq.values();
    let eta = contrast_vector(&detection.tau, k, x.len())?;
    let (line, z_obs, variance) = line_embedding(x, seq.covariance(), &eta)?;
    let naive = naive_p(z_obs, variance)?;
    let region = match opts.method {
        Method::Naive => Ok(IntervalSet::real_line()),
        Method::Full => {
            let out = match opts.selection {
                Selection::FixedK(kk) => para_dp_fixed_k(&line, kk, opts.para_dp())?,
                Selection::Penalized(beta) => para_dp_penalized(&line, beta, opts.para_dp())?,
            };
            match selection_region(&out.path, &detection.tau) {
                Err(Error::EmptyRegion(_)) if ties_at_observation(&out.path, z_obs, detection.loss) => {
                    Err(Error::Degenerate(format!(
                        "detected vector {} ties {} at the observed point and is optimal on no interval",
                        detection.tau,
                        out.path.cp_at(z_obs)
                    )))
                }
                r => r,
            }
        }
        Method::OverConditioned => match &detection.table {
            Table::FixedK(t) => oc_truncation_region(t, &line, z_obs),
            Table::Penalized(t) => oc_truncation_region_penalized(t, &line, z_obs),
        },
    };
    let (region, selective_p, diagnostic) = match (opts.method, region) {
        (Method::Naive, r) => (r?, None, None),
        (_, Ok(region)) => match truncated_gaussian_two_sided_p(z_obs, variance, &region) {
            Ok(p) => (region, Some(p), None),
            Err(Error::Degenerate(msg)) => (region, None, Some(msg)),
            Err(e) => return Err(e),
        },
        (_, Err(Error::Degenerate(msg))) => (IntervalSet::empty(), None, Some(msg)),
        (_, Err(e)) => return Err(e),
    };
    Ok(TestResult {
        cp_position: detection.tau.positions()[k - 1],
        k_index: k,
        z_obs,
        variance,
        naive_p: naive,
        selective_p,
        truncation: region,
        method: opts.method,
        diagnostic,
    })
}

/// An exact tie at `z_obs` leaves the detected vector optimal on a null set.
fn ties_at_observation(path: &ParametricPath, z_obs: f64, detected_loss: f64) -> bool {
    (path.loss_at(z_obs) - detected_loss).abs() <= 1e-9 * (1.0 + detected_loss.abs())
}

/// Detection plus one test per detected changepoint, ordered by position.
pub fn run_inference(seq: &ObservedSequence, opts: &InferenceOptions) -> Result<(Detection, Vec<TestResult>)> {
    let detection = Detection::run(seq.values(), opts.selection, opts.min_segment_len)?;
    let results = (1..=detection.tau.dim())
        .into_par_iter()
        .map(|k| test_changepoint(seq, &detection, k, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok((detection, results))
}

/// Selective p-values for every detected changepoint; empty when nothing is detected.
pub fn optseg_si(seq: &ObservedSequence, opts: &InferenceOptions) -> Result<Vec<TestResult>> {
    run_inference(seq, opts).map(|(_, r)| r)
}
