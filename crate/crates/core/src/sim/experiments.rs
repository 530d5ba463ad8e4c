// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ks::ks_uniform;
use super::{sample_sequence, trial_rng, MeanSpec, NoiseSpec};
use crate::error::{validation, Error, Result};
use crate::format::sig12;
use crate::inference::{
    bonferroni_adjust, estimate_variance_max_segment, run_inference, test_changepoint, Detection,
    InferenceOptions, Method, Selection,
};
use crate::model::{Covariance, ObservedSequence};

/// Covariance handed to the inference step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource {
    /// The generating covariance.
    Known,
    /// `sigma^2 I` with `sigma^2` the largest within-segment variance of the detected segmentation.
    MaxSegment,
    /// `sigma^2 I` with the given value.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FprConfig {
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub selection: Selection,
    pub noise: NoiseSpec,
    pub variance: VarianceSource,
    pub seed: u64,
    pub min_segment_len: usize,
}

impl Default for FprConfig {
    fn default() -> Self {
        Self {
            n_values: vec![20],
            trials: 1000,
            methods: vec![Method::Full],
            alpha: 0.05,
            selection: Selection::FixedK(2),
            noise: NoiseSpec::gaussian(1.0),
            variance: VarianceSource::Known,
            seed: 0,
            min_segment_len: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub delta_mu: Vec<f64>,
    pub segment_lengths: Vec<usize>,
    pub base_level: f64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub selection: Selection,
    pub noise: NoiseSpec,
    pub variance: VarianceSource,
    /// Detections within this distance of a true changepoint count as correct.
    pub window: usize,
    pub seed: u64,
    pub min_segment_len: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            delta_mu: vec![4.0],
            segment_lengths: vec![20, 20, 20],
            base_level: 1.0,
            trials: 1000,
            methods: vec![Method::Full, Method::OverConditioned],
            alpha: 0.05,
            selection: Selection::FixedK(2),
            noise: NoiseSpec::gaussian(1.0),
            variance: VarianceSource::Known,
            window: 2,
            seed: 0,
            min_segment_len: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    /// `(N, K)` pairs.
    pub cases: Vec<(usize, usize)>,
    pub trials: usize,
    /// Jump between alternating segment levels of the timed sequences.
    pub delta_mu: f64,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { cases: vec![(200, 9), (400, 19)], trials: 10, delta_mu: 2.0, seed: 0 }
    }
}

/// Outcome of one method on one simulated sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub delta_mu: Option<f64>,
    pub method: Method,
    pub trial: usize,
    /// ChaCha stream the sequence was drawn from.
    pub stream: u64,
    pub detected: Vec<usize>,
    /// `None` where the p-value could not be computed.
    pub p_values: Vec<Option<f64>>,
    pub rejected: Vec<bool>,
    /// Whether each detection was matched to a true changepoint (power runs only).
    pub correct: Vec<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub delta_mu: Option<f64>,
    pub method: Method,
    pub trials: usize,
    pub tests: usize,
    pub failed_tests: usize,
    pub failed_trials: usize,
    /// Share of trials with at least one rejection (null experiments).
    pub fpr: Option<f64>,
    pub correct_detections: usize,
    pub correct_rejections: usize,
    /// `None` when no detection was correct.
    pub power: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRecord {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub median_seconds: f64,
    pub seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub summaries: Vec<GroupSummary>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
    pub timings: Vec<TimingRecord>,
}

impl ExperimentReport {
    pub fn summary(&self, n: usize, delta_mu: Option<f64>, method: Method) -> Option<&GroupSummary> {
        self.summaries.iter().find(|s| s.n == n && s.delta_mu == delta_mu && s.method == method)
    }

    /// Selective (or naive, for that method) p-values of one group, failures skipped.
    pub fn p_values(&self, n: usize, delta_mu: Option<f64>, method: Method) -> Vec<f64> {
        self.trials
            .iter()
            .filter(|t| t.n == n && t.delta_mu == delta_mu && t.method == method)
            .flat_map(|t| t.p_values.iter().flatten().copied())
            .collect()
    }

    /// Write `report.json`, `trials.csv` and, for timing runs, `timing.csv`,
    /// creating `dir` if needed.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("report.json"), json + "\n")?;

        let mut out = io::BufWriter::new(fs::File::create(dir.join("trials.csv"))?);
        writeln!(out, "n,delta_mu,method,trial,stream,detected,p_values,rejected,correct,error")?;
        let join = |items: Vec<String>| items.join(";");
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                t.n,
                t.delta_mu.map(sig12).unwrap_or_default(),
                t.method,
                t.trial,
                t.stream,
                join(t.detected.iter().map(|d| d.to_string()).collect()),
                join(t.p_values.iter().map(|p| p.map(sig12).unwrap_or_else(|| "NA".into())).collect()),
                join(t.rejected.iter().map(|r| r.to_string()).collect()),
                join(t.correct.iter().map(|r| r.to_string()).collect()),
                t.error.as_deref().unwrap_or("").replace([',', '\n'], " "),
            )?;
        }
        out.flush()?;

        if !self.timings.is_empty() {
            let mut out = io::BufWriter::new(fs::File::create(dir.join("timing.csv"))?);
            writeln!(out, "N,K,median_seconds")?;
            for t in &self.timings {
                writeln!(out, "{},{},{}", t.n, t.k, sig12(t.median_seconds))?;
            }
            out.flush()?;
        }
        Ok(())
    }
}

/// One-to-one matching of detections to true changepoints within `window`,
/// greedy by distance with ties going to the leftmost true changepoint.
pub fn match_detections(truth: &[usize], detected: &[usize], window: usize) -> Vec<bool> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (ti, &t) in truth.iter().enumerate() {
        for (di, &d) in detected.iter().enumerate() {
            let dist = t.abs_diff(d);
            if dist <= window {
                pairs.push((dist, ti, di));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_t = vec![false; truth.len()];
    let mut matched = vec![false; detected.len()];
    for (_, ti, di) in pairs {
        if !used_t[ti] && !matched[di] {
            used_t[ti] = true;
            matched[di] = true;
        }
    }
    matched
}

struct TrialSetup<'a> {
    alpha: f64,
    selection: Selection,
    variance: VarianceSource,
    noise: &'a NoiseSpec,
    min_segment_len: usize,
    methods: &'a [Method],
}

fn check_common(trials: usize, alpha: f64, methods: &[Method], noise: &NoiseSpec) -> Result<()> {
    if trials == 0 {
        return Err(validation!("trials must be >= 1"));
    }
    if methods.is_empty() {
        return Err(validation!("at least one method is required"));
    }
    bonferroni_adjust(alpha, 1)?;
    noise.validate()
}

fn inference_covariance(
    setup: &TrialSetup,
    x: &[f64],
    detection: &Detection,
) -> Result<Covariance> {
    match setup.variance {
        VarianceSource::Known => Ok(setup.noise.covariance()),
        VarianceSource::Fixed(s) => Ok(Covariance::ScaledIdentity { sigma2: s }),
        VarianceSource::MaxSegment => {
            let s = estimate_variance_max_segment(x, &detection.tau)?;
            if s > 0.0 {
                Ok(Covariance::ScaledIdentity { sigma2: s })
            } else {
                Err(Error::Estimation("estimated variance is zero".into()))
            }
        }
    }
}

/// Detect once, then test every detected changepoint with each method.
fn run_trial(setup: &TrialSetup, x: Vec<f64>) -> Vec<(Vec<usize>, Vec<Option<f64>>, Option<String>)> {
    let fail = |msg: String| vec![(Vec::new(), Vec::new(), Some(msg)); setup.methods.len()];
    let detection = match Detection::run(&x, setup.selection, setup.min_segment_len) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let detected = detection.tau.positions().to_vec();
    let cov = match inference_covariance(setup, &x, &detection) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let seq = match ObservedSequence::new(x, cov) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    setup
        .methods
        .iter()
        .map(|&method| {
            let opts = InferenceOptions {
                selection: setup.selection,
                method,
                min_segment_len: setup.min_segment_len,
                pruning: true,
            };
            let mut ps = Vec::with_capacity(detected.len());
            let mut err = None;
            for k in 1..=detected.len() {
                match test_changepoint(&seq, &detection, k, &opts) {
                    Ok(r) => ps.push(r.p_value()),
                    Err(e) => {
                        ps.push(None);
                        err.get_or_insert(e.to_string());
                    }
                }
            }
            (detected.clone(), ps, err)
        })
        .collect()
}

fn rejections(p_values: &[Option<f64>], alpha: f64) -> Vec<bool> {
    let level = if p_values.is_empty() { alpha } else { alpha / p_values.len() as f64 };
    p_values.iter().map(|p| p.is_some_and(|p| p < level)).collect()
}

fn summarize(records: &[TrialRecord], null: bool) -> Vec<GroupSummary> {
    let mut keys: Vec<(usize, Option<f64>, Method)> = Vec::new();
    for r in records {
        let key = (r.n, r.delta_mu, r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(n, delta_mu, method)| {
            let group: Vec<&TrialRecord> =
                records.iter().filter(|r| r.n == n && r.delta_mu == delta_mu && r.method == method).collect();
            let trials = group.len();
            let tests = group.iter().map(|r| r.p_values.len()).sum();
            let failed_tests = group.iter().map(|r| r.p_values.iter().filter(|p| p.is_none()).count()).sum();
            let failed_trials = group.iter().filter(|r| r.error.is_some()).count();
            let any_reject = group.iter().filter(|r| r.rejected.iter().any(|&b| b)).count();
            let correct_detections = group.iter().map(|r| r.correct.iter().filter(|&&c| c).count()).sum();
            let correct_rejections = group
                .iter()
                .map(|r| r.correct.iter().zip(&r.rejected).filter(|(&c, &rej)| c && rej).count())
                .sum();
            let ps: Vec<f64> = group.iter().flat_map(|r| r.p_values.iter().flatten().copied()).collect();
            let ks = ks_uniform(&ps);
            GroupSummary {
                n,
                delta_mu,
                method,
                trials,
                tests,
                failed_tests,
                failed_trials,
                fpr: null.then(|| any_reject as f64 / trials as f64),
                correct_detections,
                correct_rejections,
                power: (!null && correct_detections > 0)
                    .then(|| correct_rejections as f64 / correct_detections as f64),
                ks_statistic: ks.map(|k| k.0),
                ks_p_value: ks.map(|k| k.1),
            }
        })
        .collect()
}

/// Null sequences of each length; a trial is a false positive when any detected
/// changepoint is rejected at the Bonferroni-adjusted level.
pub fn run_fpr_experiment(cfg: &FprConfig) -> Result<ExperimentReport> {
    check_common(cfg.trials, cfg.alpha, &cfg.methods, &cfg.noise)?;
    if cfg.n_values.is_empty() {
        return Err(validation!("at least one sequence length is required"));
    }
    if cfg.n_values.iter().any(|&n| n < 2) {
        return Err(validation!("sequence lengths must be >= 2"));
    }
    if let Selection::FixedK(k) = cfg.selection {
        if let Some(&n) = cfg.n_values.iter().find(|&&n| k == 0 || k >= n) {
            return Err(validation!("K = {k} is not valid for N = {n}"));
        }
    }
    let setup = TrialSetup {
        alpha: cfg.alpha,
        selection: cfg.selection,
        variance: cfg.variance,
        noise: &cfg.noise,
        min_segment_len: cfg.min_segment_len,
        methods: &cfg.methods,
    };
    let mut records = Vec::new();
    for (gi, &n) in cfg.n_values.iter().enumerate() {
        let mean = MeanSpec::null(n);
        let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let stream = ((gi as u64) << 32) | t as u64;
                let x = sample_sequence(&mean, &cfg.noise, &mut trial_rng(cfg.seed, stream));
                run_trial(&setup, x)
                    .into_iter()
                    .zip(&cfg.methods)
                    .map(|((detected, p_values, error), &method)| TrialRecord {
                        n,
                        delta_mu: None,
                        method,
                        trial: t,
                        stream,
                        rejected: rejections(&p_values, setup.alpha),
                        correct: Vec::new(),
                        detected,
                        p_values,
                        error,
                    })
                    .collect()
            })
            .collect();
        records.extend(per_trial.into_iter().flatten());
    }
    records.sort_by_key(|r| (r.n, cfg.methods.iter().position(|&m| m == r.method), r.trial));
    Ok(ExperimentReport {
        kind: "fpr".into(),
        config: serde_json::to_value(cfg).map_err(|e| validation!("config: {e}"))?,
        summaries: summarize(&records, true),
        trials: records,
        timings: Vec::new(),
    })
}

/// Staircase means with jump `delta_mu`; power is the share of correctly
/// located detections that are also rejected.
pub fn run_power_experiment(cfg: &PowerConfig) -> Result<ExperimentReport> {
    check_common(cfg.trials, cfg.alpha, &cfg.methods, &cfg.noise)?;
    if cfg.delta_mu.is_empty() {
        return Err(validation!("at least one jump size is required"));
    }
    let setup = TrialSetup {
        alpha: cfg.alpha,
        selection: cfg.selection,
        variance: cfg.variance,
        noise: &cfg.noise,
        min_segment_len: cfg.min_segment_len,
        methods: &cfg.methods,
    };
    let mut records = Vec::new();
    for (gi, &delta) in cfg.delta_mu.iter().enumerate() {
        let mean = MeanSpec::staircase(&cfg.segment_lengths, cfg.base_level, delta)?;
        let n = mean.len();
        if let Selection::FixedK(k) = cfg.selection {
            if k == 0 || k >= n {
                return Err(validation!("K = {k} is not valid for N = {n}"));
            }
        }
        let truth = mean.true_changepoints();
        let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let stream = ((gi as u64) << 32) | t as u64;
                let x = sample_sequence(&mean, &cfg.noise, &mut trial_rng(cfg.seed, stream));
                run_trial(&setup, x)
                    .into_iter()
                    .zip(&cfg.methods)
                    .map(|((detected, p_values, error), &method)| TrialRecord {
                        n,
                        delta_mu: Some(delta),
                        method,
                        trial: t,
                        stream,
                        rejected: rejections(&p_values, setup.alpha),
                        correct: match_detections(&truth, &detected, cfg.window),
                        detected,
                        p_values,
                        error,
                    })
                    .collect()
            })
            .collect();
        records.extend(per_trial.into_iter().flatten());
    }
    let order = |r: &TrialRecord| {
        (
            cfg.delta_mu.iter().position(|&d| Some(d) == r.delta_mu),
            cfg.methods.iter().position(|&m| m == r.method),
            r.trial,
        )
    };
    records.sort_by_key(order);
    Ok(ExperimentReport {
        kind: "power".into(),
        config: serde_json::to_value(cfg).map_err(|e| validation!("config: {e}"))?,
        summaries: summarize(&records, false),
        trials: records,
        timings: Vec::new(),
    })
}

/// Wall-clock time of the full pipeline (detection plus every test) per case.
pub fn run_timing_experiment(cfg: &TimingConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 {
        return Err(validation!("trials must be >= 1"));
    }
    let mut timings = Vec::new();
    for (ci, &(n, k)) in cfg.cases.iter().enumerate() {
        if k == 0 || k >= n {
            return Err(validation!("timing case (N = {n}, K = {k}) needs 1 <= K < N"));
        }
        // K + 1 near-equal segments with alternating levels.
        let segments: Vec<(usize, f64)> = (0..=k)
            .map(|i| {
                let len = (i + 1) * n / (k + 1) - i * n / (k + 1);
                (len, if i % 2 == 0 { 0.0 } else { cfg.delta_mu })
            })
            .collect();
        let mean = MeanSpec::new(segments)?;
        let noise = NoiseSpec::gaussian(1.0);
        let opts = InferenceOptions::fixed_k(k);
        let mut seconds = Vec::with_capacity(cfg.trials);
        for t in 0..cfg.trials {
            let stream = ((ci as u64) << 32) | t as u64;
            let x = sample_sequence(&mean, &noise, &mut trial_rng(cfg.seed, stream));
            let seq = ObservedSequence::new(x, Covariance::Identity)?;
            let start = Instant::now();
            run_inference(&seq, &opts)?;
            seconds.push(start.elapsed().as_secs_f64());
        }
        let mut sorted = seconds.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
        timings.push(TimingRecord { n, k, trials: cfg.trials, median_seconds: median, seconds });
    }
    Ok(ExperimentReport {
        kind: "timing".into(),
        config: serde_json::to_value(cfg).map_err(|e| validation!("config: {e}"))?,
        summaries: Vec::new(),
        trials: Vec::new(),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_is_one_to_one_and_prefers_the_left() {
        assert_eq!(match_detections(&[20, 40], &[19, 41], 2), vec![true, true]);
        assert_eq!(match_detections(&[20, 40], &[30], 2), vec![false]);
        // Two detections near one truth: only the closer one counts.
        assert_eq!(match_detections(&[20], &[18, 21], 2), vec![false, true]);
        // Equidistant from two truths: the left truth takes it.
        assert_eq!(match_detections(&[20, 24], &[22], 2), vec![true]);
        assert_eq!(match_detections(&[20, 24], &[22, 25], 2), vec![true, true]);
    }

    #[test]
    fn zero_trials_rejected() {
        let cfg = FprConfig { trials: 0, ..Default::default() };
        assert!(run_fpr_experiment(&cfg).is_err());
        assert!(run_timing_experiment(&TimingConfig { cases: vec![(10, 10)], ..Default::default() }).is_err());
    }

    #[test]
    fn small_fpr_run_is_reproducible() {
        let cfg = FprConfig {
            trials: 40,
            methods: vec![Method::Full, Method::Naive],
            seed: 9,
            n_values: vec![10],
            ..Default::default()
        };
        let a = run_fpr_experiment(&cfg).unwrap();
        let b = run_fpr_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let s = a.summary(10, None, Method::Full).unwrap();
        assert_eq!(s.trials, 40);
        assert_eq!(s.tests, 80);
        // Aggregates are recomputable from the records.
        let fp = a
            .trials
            .iter()
            .filter(|t| t.method == Method::Full && t.rejected.iter().any(|&r| r))
            .count();
        assert_eq!(s.fpr.unwrap(), fp as f64 / 40.0);
    }

    #[test]
    fn undefined_power_without_correct_detections() {
        let rec = TrialRecord {
            n: 60,
            delta_mu: Some(0.0),
            method: Method::Full,
            trial: 0,
            stream: 0,
            detected: vec![5, 33],
            p_values: vec![Some(0.5), Some(0.01)],
            rejected: vec![false, true],
            correct: vec![false, false],
            error: None,
        };
        let s = &summarize(&[rec], false)[0];
        assert_eq!(s.correct_detections, 0);
        assert_eq!(s.power, None);
        assert_eq!(s.fpr, None);
    }

    #[test]
    fn noiseless_staircase_has_full_power() {
        let cfg = PowerConfig {
            trials: 3,
            noise: NoiseSpec::gaussian(0.0),
            variance: VarianceSource::Fixed(1.0),
            methods: vec![Method::Full],
            ..Default::default()
        };
        let r = run_power_experiment(&cfg).unwrap();
        assert_eq!(r.summaries[0].power, Some(1.0));
    }
}
