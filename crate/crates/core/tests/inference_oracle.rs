// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use common::*;
use optseg::{
    contrast_vector, detect_fixed_k, detect_penalized, line_embedding, run_inference, Covariance, CpVector,
    InferenceOptions, IntervalSet, Method, ObservedSequence, Selection,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn detect(x: &[f64], sel: Selection) -> CpVector {
    match sel {
        Selection::FixedK(k) => detect_fixed_k(x, k).unwrap().0,
        Selection::Penalized(b) => detect_penalized(x, b).unwrap().0,
    }
}

/// Selection region found by re-running detection along a dense grid and
/// bisecting every status change.
fn grid_region(x: &[f64], sel: Selection, k: usize) -> (IntervalSet, f64, f64) {
    let n = x.len();
    let tau = detect(x, sel);
    let eta = contrast_vector(&tau, k, n).unwrap();
    let (line, z_obs, var) = line_embedding(x, &Covariance::Identity, &eta).unwrap();
    let selected = |z: f64| detect(&line.point(z), sel) == tau;
    let half = 25.0 * var.sqrt() + z_obs.abs();
    let zs = grid(-half, half, 20_001);
    let status: Vec<bool> = zs.iter().map(|&z| selected(z)).collect();
    let mut intervals = Vec::new();
    let mut start = if status[0] { Some(f64::NEG_INFINITY) } else { None };
    for i in 1..zs.len() {
        if status[i] == status[i - 1] {
            continue;
        }
        let (mut lo, mut hi) = (zs[i - 1], zs[i]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if selected(mid) == status[i - 1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let edge = 0.5 * (lo + hi);
        match start.take() {
            Some(s) => intervals.push((s, edge)),
            None => start = Some(edge),
        }
    }
    if let Some(s) = start {
        intervals.push((s, f64::INFINITY));
    }
    (IntervalSet::new(intervals).unwrap(), z_obs, var)
}

fn oracle_p(z_obs: f64, var: f64, region: &IntervalSet) -> f64 {
    let d = Normal::new(0.0, var.sqrt()).unwrap();
    let mass = |l: f64, h: f64| {
        if l >= h {
            0.0
        } else if l >= 0.0 {
            d.sf(l) - d.sf(h)
        } else {
            d.cdf(h) - d.cdf(l)
        }
    };
    let a = z_obs.abs();
    let (mut num, mut den) = (0.0, 0.0);
    for &(l, h) in region.intervals() {
        den += mass(l, h);
        num += mass(l, h.min(-a)) + mass(l.max(a), h);
    }
    num / den
}

fn seq(x: Vec<f64>) -> ObservedSequence {
    ObservedSequence::new(x, Covariance::Identity).unwrap()
}

#[test]
fn null_seed_3_reproduces_oracle_pipeline() {
    let x = normals(&mut rng(3), 10);
    let (region, z, var) = grid_region(&x, Selection::FixedK(1), 1);
    let expected = oracle_p(z, var, &region);
    let (_, res) = run_inference(&seq(x), &InferenceOptions::fixed_k(1)).unwrap();
    assert_eq!(res.len(), 1);
    let p = res[0].selective_p.unwrap();
    assert!((p - expected).abs() < 1e-6, "{p} vs {expected}");
    assert!(res[0].truncation.contains(res[0].z_obs));
}

#[test]
fn pipeline_matches_oracle_on_random_instances() {
    let mut r = rng(41);
    for case in 0..24 {
        let n = 5 + case % 6;
        let x = normals(&mut r, n);
        let sel = match case % 3 {
            0 => Selection::FixedK(1),
            1 => Selection::FixedK(2),
            _ => Selection::Penalized(2.0),
        };
        let opts = InferenceOptions { selection: sel, ..InferenceOptions::fixed_k(1) };
        let (_, res) = run_inference(&seq(x.clone()), &opts).unwrap();
        for t in &res {
            let (region, z, var) = grid_region(&x, sel, t.k_index);
            assert!((z - t.z_obs).abs() < 1e-12);
            let expected = oracle_p(z, var, &region);
            let p = t.selective_p.unwrap();
            assert!((p - expected).abs() < 1e-6, "case {case} cp {}: {p} vs {expected}", t.cp_position);
            assert!(t.truncation.is_subset_of(&region, 1e-6) && region.is_subset_of(&t.truncation, 1e-6));
        }
    }
}

#[test]
fn shifted_signal_is_significant() {
    let seq = seq(vec![0.0, 0.0, 10.0, 10.0]);
    let (_, res) = run_inference(&seq, &InferenceOptions::fixed_k(1)).unwrap();
    assert_eq!(res[0].cp_position, 2);
    assert!(res[0].selective_p.unwrap() < 0.05);
}

fn results(x: &[f64], sel: Selection, method: Method) -> Vec<optseg::TestResult> {
    let opts = InferenceOptions { selection: sel, method, ..InferenceOptions::fixed_k(1) };
    run_inference(&seq(x.to_vec()), &opts).unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oc_region_nests_inside_full(seed in 0u64..100_000, n in 6usize..25, k in 1usize..4, penalized: bool) {
        let mut x = normals(&mut rng(seed), n);
        x[n / 2..].iter_mut().for_each(|v| *v += (seed % 5) as f64);
        let sel = if penalized { Selection::Penalized(3.0) } else { Selection::FixedK(k) };
        let full = results(&x, sel, Method::Full);
        let oc = results(&x, sel, Method::OverConditioned);
        prop_assert_eq!(full.len(), oc.len());
        for (f, o) in full.iter().zip(&oc) {
            prop_assert!(f.truncation.contains_within(f.z_obs, 1e-9));
            prop_assert!(o.truncation.contains_within(o.z_obs, 1e-9));
            prop_assert!(o.truncation.is_subset_of(&f.truncation, 1e-7), "{} not in {}", o.truncation, f.truncation);
            for p in [f.selective_p, o.selective_p].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn translation_and_sign_symmetry(seed in 0u64..100_000, n in 5usize..20, shift in -50.0f64..50.0) {
        let x = normals(&mut rng(seed), n);
        let sel = Selection::FixedK(2.min(n - 1));
        let base = results(&x, sel, Method::Full);
        let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let negated: Vec<f64> = x.iter().map(|v| -v).collect();
        let s = results(&shifted, sel, Method::Full);
        let m = results(&negated, sel, Method::Full);
        for ((b, s), m) in base.iter().zip(&s).zip(&m) {
            prop_assert_eq!(b.cp_position, s.cp_position);
            prop_assert!((b.z_obs - s.z_obs).abs() < 1e-9);
            prop_assert!((b.naive_p - s.naive_p).abs() < 1e-9);
            prop_assert!((b.selective_p.unwrap() - s.selective_p.unwrap()).abs() < 1e-9);
            prop_assert!(b.truncation.is_subset_of(&s.truncation, 1e-9) && s.truncation.is_subset_of(&b.truncation, 1e-9));

            prop_assert_eq!(b.cp_position, m.cp_position);
            prop_assert!((b.z_obs + m.z_obs).abs() < 1e-10);
            prop_assert!((b.naive_p - m.naive_p).abs() < 1e-10);
            prop_assert!((b.selective_p.unwrap() - m.selective_p.unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn correlated_covariance_pipeline_matches_dense() {
    let x = normals(&mut rng(4), 12);
    let (sigma2, xi): (f64, f64) = (1.3, 0.5);
    let rows: Vec<Vec<f64>> =
        (0..12).map(|i: i32| (0..12).map(|j: i32| sigma2 * xi.powi((i - j).abs())).collect()).collect();
    let geo = ObservedSequence::new(x.clone(), Covariance::Geometric { sigma2, xi }).unwrap();
    let dense = ObservedSequence::new(x, Covariance::Dense(optseg::DenseMatrix::from_rows(rows).unwrap())).unwrap();
    let a = optseg::optseg_si(&geo, &InferenceOptions::fixed_k(2)).unwrap();
    let b = optseg::optseg_si(&dense, &InferenceOptions::fixed_k(2)).unwrap();
    for (a, b) in a.iter().zip(&b) {
        assert!((a.selective_p.unwrap() - b.selective_p.unwrap()).abs() < 1e-9);
        assert!((a.variance - b.variance).abs() < 1e-12);
    }
}
