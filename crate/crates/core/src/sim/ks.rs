// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-sample Kolmogorov-Smirnov test against Uniform(0, 1).

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form converges fast for small arguments.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=50).map(|j| ((2 * j - 1) as f64).powi(2)).map(|k| (k * c).exp()).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// KS statistic `D` and its asymptotic p-value (with Stephens' small-sample
/// correction). Returns `None` for an empty sample.
pub fn ks_uniform(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Some((d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // Critical values of the limiting distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.0) - 0.2700).abs() < 1e-4);
        // Both series agree where they meet.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * 1.18f64.powi(2));
        let s: f64 = (1..=50).map(|j| ((2 * j - 1) as f64).powi(2)).map(|k| (k * c).exp()).sum();
        let small = 1.0 - (2.0 * std::f64::consts::PI).sqrt() / 1.18 * s;
        assert!((small - kolmogorov_sf(1.18)).abs() < 1e-10);
    }

    #[test]
    fn uniform_grid_is_accepted_and_skew_rejected() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_uniform(&grid).unwrap();
        assert!(d <= 0.0005 + 1e-12 && p > 0.99);
        let skewed: Vec<f64> = grid.iter().map(|u| u * u).collect();
        assert!(ks_uniform(&skewed).unwrap().1 < 1e-6);
        assert!(ks_uniform(&[]).is_none());
    }
}
