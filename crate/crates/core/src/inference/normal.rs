// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gaussian tail arithmetic for (truncated) two-sided p-values.
//!
//! Interval masses are formed from same-sign tail differences and carried in
//! log space, so regions far out in a tail keep their relative accuracy.

use statrs::function::erf::{erf, erfc};

use crate::error::{validation, Error, Result};
use crate::intervals::IntervalSet;

const LN_DEGENERATE: f64 = -690.775_527_898_213_7; // ln(1e-300)
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln P(Z > x)` for standard normal `Z`, accurate far into the upper tail.
pub fn log_upper_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < 5.0 {
        return (0.5 * erfc(x / std::f64::consts::SQRT_2)).ln();
    }
    // Mills ratio by backward continued-fraction evaluation.
    let mut t = x;
    for k in (1..=300).rev() {
        t = x + k as f64 / t;
    }
    -0.5 * x * x - LN_SQRT_2PI - t.ln()
}

/// `ln(1 - exp(v))` for `v <= 0`.
fn ln_one_minus_exp(v: f64) -> f64 {
    if v > -std::f64::consts::LN_2 {
        (-v.exp_m1()).ln()
    } else {
        (-v.exp()).ln_1p()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `ln P(lo <= Z <= hi)` for standard normal `Z`.
pub fn log_interval_mass(lo: f64, hi: f64) -> f64 {
    if !(lo < hi) {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        let (a, b) = (log_upper_tail(lo), log_upper_tail(hi));
        a + ln_one_minus_exp(b - a)
    } else if hi <= 0.0 {
        let (a, b) = (log_upper_tail(-hi), log_upper_tail(-lo));
        a + ln_one_minus_exp(b - a)
    } else {
        let half = |v: f64| if v.is_infinite() { 0.5 } else { 0.5 * erf(v.abs() / std::f64::consts::SQRT_2) };
        (half(hi) + half(lo)).ln()
    }
}

/// Two-sided p-value of `z_obs` under `N(0, variance)`.
pub fn naive_p(z_obs: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(validation!("variance must be positive, got {variance}"));
    }
    let a = z_obs.abs() / variance.sqrt();
    Ok((2.0 * log_upper_tail(a).exp()).clamp(0.0, 1.0))
}

/// Two-sided p-value of `z_obs` under `N(0, variance)` truncated to `region`:
/// the truncated mass of `|Z| >= |z_obs|`.
pub fn truncated_gaussian_two_sided_p(z_obs: f64, variance: f64, region: &IntervalSet) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(validation!("variance must be positive, got {variance}"));
    }
    let sd = variance.sqrt();
    let a = z_obs.abs() / sd;
    let mut den = Vec::with_capacity(region.intervals().len());
    let mut num = Vec::with_capacity(2 * region.intervals().len());
    for &(lo, hi) in region.intervals() {
        let (l, h) = (lo / sd, hi / sd);
        den.push(log_interval_mass(l, h));
        if l <= -a {
            num.push(log_interval_mass(l, h.min(-a)));
        }
        if h >= a {
            num.push(log_interval_mass(l.max(a), h));
        }
    }
    let log_den = log_sum_exp(&den);
    if !(log_den >= LN_DEGENERATE) {
        return Err(Error::Degenerate(format!(
            "truncation region {region} has probability below 1e-300 under N(0, {variance})"
        )));
    }
    let log_num = log_sum_exp(&num);
    Ok((log_num - log_den).exp().clamp(0.0, 1.0))
}
