// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat TOML configuration for `optseg simulate`.

use std::path::PathBuf;

use optseg::sim::{
    run_fpr_experiment, run_power_experiment, run_timing_experiment, ExperimentReport, FprConfig, NoiseFamily,
    NoiseSpec, PowerConfig, TimingConfig, VarianceSource,
};
use optseg::{Method, Selection};
use serde::Deserialize;

use crate::CliError;

/// Every key is optional except `experiment`; unset keys keep the preset value.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    /// `fpr`, `power` or `timing`.
    pub experiment: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub n_values: Option<Vec<usize>>,
    pub noise: Option<String>,
    pub sigma2: Option<f64>,
    pub xi: Option<f64>,
    /// `known`, `max_segment` or a fixed number.
    pub variance: Option<toml::Value>,
    pub min_seg: Option<usize>,
    pub delta_mu: Option<Vec<f64>>,
    pub segment_lengths: Option<Vec<usize>>,
    pub base_level: Option<f64>,
    pub window: Option<usize>,
    pub cases: Option<Vec<(usize, usize)>>,
    pub out: Option<PathBuf>,
}

const FPR_KEYS: &[&str] = &[
    "experiment", "trials", "seed", "alpha", "k", "beta", "methods", "n_values", "noise", "sigma2", "xi", "variance",
    "min_seg", "out",
];
const POWER_KEYS: &[&str] = &[
    "experiment", "trials", "seed", "alpha", "k", "beta", "methods", "noise", "sigma2", "xi", "variance", "min_seg",
    "delta_mu", "segment_lengths", "base_level", "window", "out",
];
const TIMING_KEYS: &[&str] = &["experiment", "trials", "seed", "delta_mu", "cases", "out"];

impl SimFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))?;
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        let kind = file.experiment.as_deref().ok_or_else(|| {
            CliError::Validation("config: missing key `experiment` (one of fpr, power, timing)".into())
        })?;
        let allowed = match kind {
            "fpr" => FPR_KEYS,
            "power" => POWER_KEYS,
            "timing" => TIMING_KEYS,
            other => {
                return Err(CliError::Validation(format!(
                    "config: unknown experiment {other:?}; expected fpr, power or timing"
                )))
            }
        };
        if let Some(key) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Validation(format!(
                "config: key `{key}` does not apply to the {kind} experiment; valid keys: {}",
                allowed.join(", ")
            )));
        }
        if file.k.is_some() && file.beta.is_some() {
            return Err(CliError::Validation("config: set at most one of `k` and `beta`".into()));
        }
        Ok(file)
    }

    fn selection(&self, default: Selection) -> Selection {
        match (self.k, self.beta) {
            (Some(k), _) => Selection::FixedK(k),
            (_, Some(b)) => Selection::Penalized(b),
            _ => default,
        }
    }

    fn methods(&self, default: Vec<Method>) -> Result<Vec<Method>, CliError> {
        match &self.methods {
            None => Ok(default),
            Some(names) => names.iter().map(|m| m.parse::<Method>().map_err(CliError::from)).collect(),
        }
    }

    fn noise(&self, default: NoiseSpec) -> Result<NoiseSpec, CliError> {
        let family = match &self.noise {
            Some(name) => name.parse::<NoiseFamily>()?,
            None => default.family,
        };
        Ok(NoiseSpec { family, sigma2: self.sigma2.unwrap_or(default.sigma2), xi: self.xi.unwrap_or(default.xi) })
    }

    fn variance(&self, default: VarianceSource) -> Result<VarianceSource, CliError> {
        match &self.variance {
            None => Ok(default),
            Some(toml::Value::String(s)) if s == "known" => Ok(VarianceSource::Known),
            Some(toml::Value::String(s)) if s == "max_segment" => Ok(VarianceSource::MaxSegment),
            Some(toml::Value::Float(v)) => Ok(VarianceSource::Fixed(*v)),
            Some(toml::Value::Integer(v)) => Ok(VarianceSource::Fixed(*v as f64)),
            Some(other) => Err(CliError::Validation(format!(
                "config: variance must be \"known\", \"max_segment\" or a number, got {other}"
            ))),
        }
    }

    /// Run the configured experiment; `seed` overrides the file's seed.
    pub fn run(&self, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
        let seed = seed.or(self.seed);
        let report = match self.experiment.as_deref() {
            Some("fpr") => {
                let d = FprConfig::default();
                let cfg = FprConfig {
                    n_values: self.n_values.clone().unwrap_or(d.n_values),
                    trials: self.trials.unwrap_or(d.trials),
                    methods: self.methods(d.methods)?,
                    alpha: self.alpha.unwrap_or(d.alpha),
                    selection: self.selection(d.selection),
                    noise: self.noise(d.noise)?,
                    variance: self.variance(d.variance)?,
                    seed: seed.unwrap_or(d.seed),
                    min_segment_len: self.min_seg.unwrap_or(d.min_segment_len),
                };
                run_fpr_experiment(&cfg)?
            }
            Some("power") => {
                let d = PowerConfig::default();
                let cfg = PowerConfig {
                    delta_mu: self.delta_mu.clone().unwrap_or(d.delta_mu),
                    segment_lengths: self.segment_lengths.clone().unwrap_or(d.segment_lengths),
                    base_level: self.base_level.unwrap_or(d.base_level),
                    trials: self.trials.unwrap_or(d.trials),
                    methods: self.methods(d.methods)?,
                    alpha: self.alpha.unwrap_or(d.alpha),
                    selection: self.selection(d.selection),
                    noise: self.noise(d.noise)?,
                    variance: self.variance(d.variance)?,
                    window: self.window.unwrap_or(d.window),
                    seed: seed.unwrap_or(d.seed),
                    min_segment_len: self.min_seg.unwrap_or(d.min_segment_len),
                };
                run_power_experiment(&cfg)?
            }
            Some("timing") => {
                let d = TimingConfig::default();
                let delta_mu = match self.delta_mu.as_deref() {
                    None => d.delta_mu,
                    Some([v]) => *v,
                    Some(_) => {
                        return Err(CliError::Validation("config: timing takes a single delta_mu value".into()))
                    }
                };
                let cfg = TimingConfig {
                    cases: self.cases.clone().unwrap_or(d.cases),
                    trials: self.trials.unwrap_or(d.trials),
                    delta_mu,
                    seed: seed.unwrap_or(d.seed),
                };
                run_timing_experiment(&cfg)?
            }
            _ => unreachable!("experiment kind checked in parse"),
        };
        Ok(report)
    }
}
