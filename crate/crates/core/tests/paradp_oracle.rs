// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use common::*;
use optseg::{
    detect_fixed_k, detect_penalized, loss_fixed, loss_penalized, para_dp_fixed_k, para_dp_penalized, CpVector,
    LineEmbedding, ParaDpOptions, ParaDpOutput,
};
use proptest::prelude::*;

fn opts(pruning: bool) -> ParaDpOptions {
    ParaDpOptions { pruning, ..Default::default() }
}

/// Check the path against exhaustive enumeration on a grid.
fn check_against_grid(out: &ParaDpOutput, line: &LineEmbedding, vectors: &[CpVector], beta: Option<f64>, zs: &[f64]) {
    for &z in zs {
        let x = line.point(z);
        let loss = |t: &CpVector| match beta {
            None => loss_fixed(&x, t).unwrap(),
            Some(b) => loss_penalized(&x, t, b).unwrap(),
        };
        let (best_tau, best) = brute_min(vectors, loss, 0.0);
        let got = out.path.cp_at(z);
        let got_loss = loss(got);
        assert!(
            got == &best_tau || (got_loss - best).abs() <= 1e-7,
            "z = {z}: path {got} ({got_loss}) vs oracle {best_tau} ({best})"
        );
        // The stored quadratic reproduces the direct loss.
        assert!((out.path.loss_at(z) - got_loss).abs() <= 1e-7 * (1.0 + got_loss.abs()));
    }
}

#[test]
fn fixed_k_seed_11_matches_grid() {
    let mut r = rng(11);
    let line = LineEmbedding::new(normals(&mut r, 8), normals(&mut r, 8)).unwrap();
    let vectors = fixed_k_vectors(8, 2);
    assert_eq!(vectors.len(), 21);
    for pruning in [true, false] {
        let out = para_dp_fixed_k(&line, 2, opts(pruning)).unwrap();
        check_against_grid(&out, &line, &vectors, None, &grid(-30.0, 30.0, 2001));
    }
}

#[test]
fn penalized_seed_13_matches_grid() {
    let mut r = rng(13);
    let line = LineEmbedding::new(normals(&mut r, 8), normals(&mut r, 8)).unwrap();
    let vectors = all_vectors(8);
    assert_eq!(vectors.len(), 128);
    for pruning in [true, false] {
        let out = para_dp_penalized(&line, 2.0, opts(pruning)).unwrap();
        check_against_grid(&out, &line, &vectors, Some(2.0), &grid(-30.0, 30.0, 2001));
    }
}

#[test]
fn contrast_lines_match_grid() {
    let mut r = rng(5);
    for case in 0..40 {
        let n = 3 + case % 6;
        let k = 1 + case % 2;
        let line = random_line(&mut r, n, k.min(n - 1));
        let out = para_dp_fixed_k(&line, k.min(n - 1), opts(true)).unwrap();
        check_against_grid(&out, &line, &fixed_k_vectors(n, k.min(n - 1)), None, &grid(-20.0, 20.0, 401));
        let out = para_dp_penalized(&line, 1.5, opts(true)).unwrap();
        check_against_grid(&out, &line, &all_vectors(n), Some(1.5), &grid(-20.0, 20.0, 401));
    }
}

#[test]
fn observed_point_reproduces_detection() {
    let mut r = rng(17);
    for _ in 0..30 {
        let n = 12;
        let line = random_line(&mut r, n, 3);
        let z = r_uniform(&mut r);
        let x = line.point(z);
        let out = para_dp_fixed_k(&line, 3, opts(true)).unwrap();
        let (_, loss) = detect_fixed_k(&x, 3).unwrap();
        assert!((out.path.loss_at(z) - loss).abs() < 1e-7);
        let out = para_dp_penalized(&line, 3.0, opts(true)).unwrap();
        let (_, loss) = detect_penalized(&x, 3.0).unwrap();
        assert!((out.path.loss_at(z) - loss).abs() < 1e-7);
    }
}

fn r_uniform(r: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    r.random_range(-10.0..10.0)
}

#[test]
fn every_member_extends_an_optimal_prefix() {
    let mut r = rng(23);
    for _ in 0..10 {
        let line = random_line(&mut r, 9, 3);
        let o = ParaDpOptions { retain_cells: true, ..Default::default() };
        let out = para_dp_fixed_k(&line, 3, o).unwrap();
        for cell in &out.cells {
            let k = cell.k.unwrap();
            assert!(cell.members.len() <= cell.path.len(), "more members than pieces");
            if k == 0 {
                continue;
            }
            for mem in &cell.members {
                let p = mem.cps.positions();
                let m = p[k - 1];
                let below = out.cells.iter().find(|c| c.k == Some(k - 1) && c.n == m).unwrap();
                let prefix = CpVector::new(p[..k - 1].to_vec(), m).unwrap();
                assert!(below.members.iter().any(|b| b.cps == prefix), "{} not built from an optimal prefix", mem.cps);
            }
        }
    }
}

fn same_path(a: &ParaDpOutput, b: &ParaDpOutput) {
    let (sa, sb) = (a.path.solution(), b.path.solution());
    assert_eq!(sa.len(), sb.len());
    for (x, y) in sa.breakpoints().iter().zip(sb.breakpoints()) {
        assert!(x == y || (x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
    }
    let va: Vec<&CpVector> = sa.pieces().iter().map(|&i| &a.path.vectors()[i]).collect();
    let vb: Vec<&CpVector> = sb.pieces().iter().map(|&i| &b.path.vectors()[i]).collect();
    assert_eq!(va, vb);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pruning_does_not_change_the_path(seed in 0u64..10_000, n in 4usize..16, k in 1usize..4, beta in 0.1f64..10.0) {
        let mut r = rng(seed);
        let k = k.min(n - 1);
        let line = random_line(&mut r, n, k);
        same_path(&para_dp_fixed_k(&line, k, opts(true)).unwrap(), &para_dp_fixed_k(&line, k, opts(false)).unwrap());
        same_path(&para_dp_penalized(&line, beta, opts(true)).unwrap(), &para_dp_penalized(&line, beta, opts(false)).unwrap());
    }

    #[test]
    fn pruning_examines_no_more_candidates(seed in 0u64..10_000, n in 6usize..20) {
        let mut r = rng(seed);
        let line = random_line(&mut r, n, 2);
        let pruned = para_dp_penalized(&line, 2.0, opts(true)).unwrap();
        let full = para_dp_penalized(&line, 2.0, opts(false)).unwrap();
        prop_assert!(pruned.candidates_examined <= full.candidates_examined);
    }

    #[test]
    fn min_segment_paths_respect_the_constraint(seed in 0u64..10_000, n in 6usize..14) {
        let mut r = rng(seed);
        let line = random_line(&mut r, n, 1);
        let o = ParaDpOptions { min_segment_len: 2, ..Default::default() };
        for out in [para_dp_fixed_k(&line, 2, o).unwrap(), para_dp_penalized(&line, 1.0, o).unwrap()] {
            for v in out.path.vectors() {
                prop_assert!(v.segments(n).all(|(s, e)| e + 1 - s >= 2), "{v}");
            }
        }
    }
}

#[test]
fn penalized_dimension_is_monotone_in_beta() {
    let mut r = rng(29);
    for _ in 0..20 {
        let x = normals(&mut r, 15);
        let mut last = usize::MAX;
        for beta in grid(0.0, 12.0, 49) {
            let (t, _) = detect_penalized(&x, beta).unwrap();
            assert!(t.dim() <= last);
            last = t.dim();
        }
    }
}

#[test]
fn detection_matches_enumeration() {
    let mut r = rng(31);
    for case in 0..60 {
        let n = 4 + case % 7;
        let x = normals(&mut r, n);
        for k in 1..=3.min(n - 1) {
            let (_, l) = detect_fixed_k(&x, k).unwrap();
            assert!((l - brute_fixed(&x, k).1).abs() <= 1e-9);
        }
        let (t, l) = detect_penalized(&x, 1.0).unwrap();
        let (bt, bl) = brute_penalized(&x, 1.0);
        assert!((l - bl).abs() <= 1e-9);
        assert_eq!(t, bt);
    }
}
