// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use common::*;
use optseg::envelope::dedup_candidates;
use optseg::quadratic::dominated_everywhere;
use optseg::{para_cp, Envelope, QuadraticFn};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_family(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<(usize, QuadraticFn)> {
    (0..n)
        .map(|i| {
            let q2 = r.random_range(0.0..3.0);
            (i, QuadraticFn::new(q2, r.random_range(-10.0..10.0), r.random_range(-20.0..20.0)))
        })
        .collect()
}

fn check_envelope(cands: &[(usize, QuadraticFn)], zs: &[f64]) {
    let sol = para_cp(&dedup_candidates(cands)).unwrap();
    let qf = |id: usize| cands.iter().find(|c| c.0 == id).unwrap().1;
    for &z in zs {
        let best = cands.iter().map(|c| c.1.eval(z)).fold(f64::INFINITY, f64::min);
        let got = qf(sol.piece_at(z)).eval(z);
        assert!((got - best).abs() <= 1e-7 * (1.0 + best.abs()), "z = {z}: {got} vs {best}");
    }
    // Continuity at breakpoints and distinct neighbours.
    for w in sol.pieces().windows(2) {
        assert_ne!(w[0], w[1]);
    }
    for (i, &b) in sol.breakpoints().iter().enumerate().skip(1) {
        let (l, r) = (qf(sol.pieces()[i - 1]).eval(b), qf(sol.pieces()[i]).eval(b));
        assert!((l - r).abs() <= 1e-7 * (1.0 + l.abs()), "jump at {b}: {l} vs {r}");
    }
}

#[test]
fn twenty_quadratics_seed_7() {
    let mut r = rng(7);
    let cands = random_family(&mut r, 20);
    check_envelope(&cands, &grid(-50.0, 50.0, 2001));
}

#[test]
fn random_families_match_grid() {
    let mut r = rng(8);
    for _ in 0..100 {
        let n = r.random_range(1..=50);
        let cands = random_family(&mut r, n);
        check_envelope(&cands, &grid(-50.0, 50.0, 2001));
    }
}

#[test]
fn families_with_duplicates_and_lines() {
    let mut r = rng(9);
    for _ in 0..50 {
        let mut cands = random_family(&mut r, 10);
        let extra: Vec<(usize, QuadraticFn)> = cands.iter().take(4).map(|&(i, f)| (i + 100, f)).collect();
        cands.extend(extra);
        cands.push((200, QuadraticFn::new(0.0, r.random_range(-5.0..5.0), 0.0)));
        check_envelope(&cands, &grid(-50.0, 50.0, 2001));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn permutation_invariant(seed in 0u64..100_000, n in 1usize..30) {
        let mut r = rng(seed);
        let mut cands = random_family(&mut r, n);
        let a = para_cp(&dedup_candidates(&cands)).unwrap();
        cands.shuffle(&mut r);
        let b = para_cp(&dedup_candidates(&cands)).unwrap();
        prop_assert_eq!(a.pieces(), b.pieces());
        for (x, y) in a.breakpoints().iter().zip(b.breakpoints()) {
            prop_assert!(x == y || (x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn dominance_matches_grid(seed in 0u64..100_000, slack in 0.0f64..3.0) {
        let mut r = rng(seed);
        let f = QuadraticFn::new(r.random_range(0.0..2.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let g = QuadraticFn::new(r.random_range(0.0..2.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let d = f - g - QuadraticFn::constant(slack);
        let mut pts = grid(-100.0, 100.0, 10_001);
        if d.q2 != 0.0 {
            pts.push(-d.q1 / (2.0 * d.q2));
        }
        let grid_says = pts.iter().all(|&z| d.eval(z) > 0.0) && d.q2 >= 0.0;
        // A positive grid can only disagree through an unbounded linear term.
        let exact = dominated_everywhere(&f, &g, slack);
        if exact {
            prop_assert!(grid_says);
        } else if grid_says {
            prop_assert!(d.q2 == 0.0 && d.q1 != 0.0);
        }
    }
}

#[test]
fn envelope_exceed_test_is_sound() {
    let mut r = rng(12);
    for _ in 0..200 {
        let cands = random_family(&mut r, 6);
        let sol = para_cp(&dedup_candidates(&cands)).unwrap();
        let env = Envelope::new(&sol, |id| cands[id].1);
        let f = QuadraticFn::new(r.random_range(0.0..3.0), r.random_range(-10.0..10.0), r.random_range(-20.0..30.0));
        if env.is_exceeded_by(&f, 0.0) {
            for z in grid(-60.0, 60.0, 4001) {
                assert!(f.eval(z) > env.eval(z) - 1e-9);
            }
        }
    }
}
