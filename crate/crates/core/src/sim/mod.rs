// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic experiments: false positive rate, power and timing.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index,
//! so results do not depend on scheduling and trials run in parallel.

mod experiments;
mod ks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

pub use experiments::{
    match_detections, run_fpr_experiment, run_power_experiment, run_timing_experiment, ExperimentReport, FprConfig,
    GroupSummary, PowerConfig, TimingConfig, TimingRecord, TrialRecord, VarianceSource,
};
pub use ks::{kolmogorov_sf, ks_uniform};

use crate::error::{validation, Result};
use crate::model::Covariance;

/// Piecewise-constant mean as consecutive `(length, level)` segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub segments: Vec<(usize, f64)>,
}

impl MeanSpec {
    pub fn new(segments: Vec<(usize, f64)>) -> Result<Self> {
        if segments.is_empty() || segments.iter().any(|&(len, lvl)| len == 0 || !lvl.is_finite()) {
            return Err(validation!("mean segments need positive lengths and finite levels"));
        }
        Ok(Self { segments })
    }

    /// All-zero mean of length `n`.
    pub fn null(n: usize) -> Self {
        Self { segments: vec![(n, 0.0)] }
    }

    /// Levels `base, base + delta, base + 2 delta, ...` over the given lengths.
    pub fn staircase(lengths: &[usize], base: f64, delta: f64) -> Result<Self> {
        Self::new(lengths.iter().enumerate().map(|(i, &l)| (l, base + i as f64 * delta)).collect())
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.0).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn means(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|&(len, lvl)| std::iter::repeat_n(lvl, len)).collect()
    }

    /// Last positions of every segment but the final one.
    pub fn true_changepoints(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out = Vec::new();
        for &(len, _) in &self.segments[..self.segments.len() - 1] {
            acc += len;
            out.push(acc);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    /// Skew-normal with shape parameter 10.
    SkewNormal,
    /// Student t with 20 degrees of freedom.
    StudentT,
}

impl std::str::FromStr for NoiseFamily {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            "skew_normal" | "skew-normal" => Ok(Self::SkewNormal),
            "student_t" | "student-t" | "t20" => Ok(Self::StudentT),
            _ => Err(validation!("unknown noise family {s:?}; expected gaussian, laplace, skew_normal or student_t")),
        }
    }
}

const SKEW_SHAPE: f64 = 10.0;
const T_DF: f64 = 20.0;

impl NoiseFamily {
    /// One draw standardized to zero mean and unit variance.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::Laplace => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -std::f64::consts::FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::SkewNormal => {
                let delta = SKEW_SHAPE / (1.0 + SKEW_SHAPE * SKEW_SHAPE).sqrt();
                let (u0, u1): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                let v = delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1;
                let two_over_pi = 2.0 / std::f64::consts::PI;
                (v - delta * two_over_pi.sqrt()) / (1.0 - two_over_pi * delta * delta).sqrt()
            }
            Self::StudentT => {
                let t = StudentT::new(T_DF).expect("valid degrees of freedom");
                t.sample(rng) * ((T_DF - 2.0) / T_DF).sqrt()
            }
        }
    }
}

/// Noise law: a standardized family scaled to variance `sigma2`, optionally
/// with correlation `xi^|i - j|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma2: f64,
    pub xi: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma2: f64) -> Self {
        Self { family: NoiseFamily::Gaussian, sigma2, xi: 0.0 }
    }

    /// `sigma2 = 0` is accepted to generate noiseless sequences.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(validation!("noise variance must be finite and >= 0, got {}", self.sigma2));
        }
        if !(0.0..1.0).contains(&self.xi) {
            return Err(validation!("correlation must lie in [0, 1), got {}", self.xi));
        }
        Ok(())
    }

    /// Covariance of the generated noise.
    pub fn covariance(&self) -> Covariance {
        if self.xi > 0.0 {
            Covariance::Geometric { sigma2: self.sigma2, xi: self.xi }
        } else if self.sigma2 == 1.0 {
            Covariance::Identity
        } else {
            Covariance::ScaledIdentity { sigma2: self.sigma2 }
        }
    }
}

/// Generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draw one sequence from `rng`.
pub fn sample_sequence(mean: &MeanSpec, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = noise.sigma2.sqrt();
    let innov = (1.0 - noise.xi * noise.xi).sqrt();
    let mut prev = 0.0;
    mean.means()
        .into_iter()
        .enumerate()
        .map(|(i, mu)| {
            let e = noise.family.sample(rng);
            // AR(1) with unit marginal variance gives correlation xi^|i-j|.
            prev = if i == 0 { e } else { noise.xi * prev + innov * e };
            mu + sd * prev
        })
        .collect()
}

/// Draw one sequence; identical seeds give identical output.
pub fn generate_sequence(mean: &MeanSpec, noise: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    noise.validate()?;
    Ok(sample_sequence(mean, noise, &mut ChaCha8Rng::seed_from_u64(seed)))
}
