// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lower envelopes of finite quadratic families.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::quadratic::{breakpoint_guard, QuadraticFn, Roots, COEF_RTOL};

/// Relative width within which two candidate breakpoints count as the same point.
const ROOT_TIE_RTOL: f64 = 1e-9;

/// Optimal candidate as a function of `z`: piece `u` covers
/// `[breakpoints[u], breakpoints[u + 1]]`, the last piece extends to `+inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSolution<I> {
    breakpoints: Vec<f64>,
    pieces: Vec<I>,
}

impl<I: Copy> PiecewiseSolution<I> {
    pub(crate) fn from_parts(breakpoints: Vec<f64>, pieces: Vec<I>) -> Self {
        debug_assert_eq!(breakpoints.len(), pieces.len());
        Self { breakpoints, pieces }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[I] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Index of the piece covering `z`; at a breakpoint the right piece wins.
    pub fn piece_index_at(&self, z: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= z).saturating_sub(1)
    }

    pub fn piece_at(&self, z: f64) -> I {
        self.pieces[self.piece_index_at(z)]
    }

    /// `(lo, hi, piece)` for every piece, with `hi = +inf` for the last one.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, I)> + '_ {
        self.pieces.iter().enumerate().map(move |(u, &p)| {
            let hi = self.breakpoints.get(u + 1).copied().unwrap_or(f64::INFINITY);
            (self.breakpoints[u], hi, p)
        })
    }

    pub fn map<J: Copy>(&self, f: impl Fn(I) -> J) -> PiecewiseSolution<J> {
        PiecewiseSolution {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// Lower envelope as a piecewise quadratic function.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    breakpoints: Vec<f64>,
    pieces: Vec<QuadraticFn>,
}

impl Envelope {
    pub fn new<I: Copy>(solution: &PiecewiseSolution<I>, qf: impl Fn(I) -> QuadraticFn) -> Self {
        Self {
            breakpoints: solution.breakpoints.clone(),
            pieces: solution.pieces.iter().map(|&p| qf(p)).collect(),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let u = self.breakpoints.partition_point(|&b| b <= z).saturating_sub(1);
        self.pieces[u].eval(z)
    }

    pub fn pieces(&self) -> &[QuadraticFn] {
        &self.pieces
    }

    /// Adds the same quadratic to every piece.
    pub fn shifted(&self, q: QuadraticFn) -> Envelope {
        Envelope {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|&p| p + q).collect(),
        }
    }

    /// Whether `f(z) - slack` exceeds the envelope at every real `z`.
    ///
    /// Decided piece by piece; a piece only counts as exceeded when the gap
    /// clears a small relative margin, so borderline cases answer `false`.
    pub fn is_exceeded_by(&self, f: &QuadraticFn, slack: f64) -> bool {
        let shifted = QuadraticFn::new(f.q2, f.q1, f.q0 - slack);
        self.pieces.iter().enumerate().all(|(u, g)| {
            let lo = self.breakpoints[u];
            let hi = self.breakpoints.get(u + 1).copied().unwrap_or(f64::INFINITY);
            let d = shifted.snapped_difference(g);
            let margin = 1e-9 * (1.0 + g.max_abs_coef().max(shifted.max_abs_coef()));
            d.infimum_on(lo, hi) > margin
        })
    }
}

fn coef_cmp(a: f64, b: f64, scale: f64) -> Ordering {
    if (a - b).abs() <= COEF_RTOL * (1.0 + scale) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Order of two quadratics as `z -> -inf`: smaller `q2`, then larger `q1`,
/// then smaller `q0`.
fn cmp_at_neg_infinity(f: &QuadraticFn, g: &QuadraticFn) -> Ordering {
    let scale = f.max_abs_coef().max(g.max_abs_coef());
    coef_cmp(f.q2, g.q2, scale)
        .then_with(|| coef_cmp(g.q1, f.q1, scale))
        .then_with(|| coef_cmp(f.q0, g.q0, scale))
}

/// Index of the candidate that is optimal as `z -> -inf`; exact ties go to the smallest index.
pub fn argmin_at_neg_infinity(candidates: &[QuadraticFn]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(validation!("no candidates"));
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if cmp_at_neg_infinity(c, &candidates[best]) == Ordering::Less {
            best = i;
        }
    }
    Ok(best)
}

/// Merges functionally identical candidates, keeping the smallest id of each group.
/// Survivors keep their input order.
pub fn dedup_candidates<I: Copy + Ord>(candidates: &[(I, QuadraticFn)]) -> Vec<(I, QuadraticFn)> {
    let n = candidates.len();
    if n < 2 {
        return candidates.to_vec();
    }
    let scale = candidates.iter().map(|c| c.1.max_abs_coef()).fold(0.0, f64::max);
    let window = COEF_RTOL * (1.0 + scale);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| candidates[i].1.q2.total_cmp(&candidates[j].1.q2));
    // rep[i] = index of the group representative for candidate i.
    let mut rep: Vec<usize> = (0..n).collect();
    let mut assigned = vec![false; n];
    for (pos, &i) in order.iter().enumerate() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut group = vec![i];
        for &j in &order[pos + 1..] {
            if candidates[j].1.q2 - candidates[i].1.q2 > window {
                break;
            }
            if !assigned[j] && candidates[i].1.same_function(&candidates[j].1) {
                assigned[j] = true;
                group.push(j);
            }
        }
        let best = *group.iter().min_by_key(|&&g| candidates[g].0).unwrap();
        for g in group {
            rep[g] = best;
        }
    }
    (0..n).filter(|&i| rep[i] == i).map(|i| candidates[i]).collect()
}

/// Point at which `d = f_j - f_cur` turns negative, if it ever does.
fn entry_root(d: &QuadraticFn) -> Option<f64> {
    match d.roots() {
        Roots::Two(r1, r2) => Some(if d.q2 > 0.0 { r1 } else { r2 }),
        Roots::One(r) if d.q1 < 0.0 => Some(r),
        _ => None,
    }
}

/// Lower envelope of `candidates` over the whole real line.
///
/// Starts from the candidate optimal at `-inf` and repeatedly jumps to the
/// nearest point where another candidate drops below the current one.
/// Candidates must be functionally distinct (see [`dedup_candidates`]).
pub fn para_cp<I: Copy + Ord>(candidates: &[(I, QuadraticFn)]) -> Result<PiecewiseSolution<I>> {
    if candidates.is_empty() {
        return Err(validation!("para_cp needs at least one candidate"));
    }
    let n = candidates.len();
    let mut cur = 0;
    for i in 1..n {
        let ord = cmp_at_neg_infinity(&candidates[i].1, &candidates[cur].1)
            .then_with(|| candidates[i].0.cmp(&candidates[cur].0));
        if ord == Ordering::Less {
            cur = i;
        }
    }
    let mut breakpoints = vec![f64::NEG_INFINITY];
    let mut pieces = vec![candidates[cur].0];
    let mut z = f64::NEG_INFINITY;
    let max_steps = n.saturating_mul(n) + 2;

    for _ in 0..max_steps {
        let lim = z + breakpoint_guard(z);
        let fc = candidates[cur].1;
        let mut best: Option<(f64, usize)> = None;
        for (j, (_, fj)) in candidates.iter().enumerate() {
            if j == cur {
                continue;
            }
            let Some(r) = entry_root(&fj.snapped_difference(&fc)) else {
                continue;
            };
            if !(r > lim) || !r.is_finite() {
                continue;
            }
            best = match best {
                None => Some((r, j)),
                Some((br, bj)) => {
                    let tol = ROOT_TIE_RTOL * (1.0 + br.abs().min(r.abs()));
                    if r < br - tol {
                        Some((r, j))
                    } else if r <= br + tol {
                        // Same crossing point: keep whichever is lower just to the right.
                        let at = br.min(r);
                        let (a, b) = (&candidates[j], &candidates[bj]);
                        let ord = coef_cmp(a.1.slope(at), b.1.slope(at), a.1.max_abs_coef().max(b.1.max_abs_coef()) * (1.0 + at.abs()))
                            .then_with(|| coef_cmp(a.1.q2, b.1.q2, a.1.max_abs_coef().max(b.1.max_abs_coef())))
                            .then_with(|| a.0.cmp(&b.0));
                        if ord == Ordering::Less {
                            Some((r.min(br), j))
                        } else {
                            Some((r.min(br), bj))
                        }
                    } else {
                        Some((br, bj))
                    }
                }
            };
        }
        match best {
            None => return Ok(PiecewiseSolution::from_parts(breakpoints, pieces)),
            Some((r, j)) => {
                breakpoints.push(r);
                pieces.push(candidates[j].0);
                z = r;
                cur = j;
            }
        }
    }
    Err(Error::Degenerate(format!(
        "envelope of {n} candidates did not terminate"
    )))
}
