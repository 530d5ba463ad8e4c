// SPDX-License-Identifier: MIT OR Apache-2.0

//! Over-conditioned truncation region: condition on every DP cell choosing
//! the same sub-vector as on the observed data, not only on the final output.
//!
//! Each cell's optimal loss along the line is the quadratic of its observed
//! optimal sub-vector, read off the observed table's backpointers. Every
//! competing split point then contributes one quadratic inequality in `z`.

use crate::detect::{DpTable, PenalizedTable};
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;
use crate::model::LineEmbedding;
use crate::quadratic::{quad_segment_cost_unchecked, QuadraticFn, Roots};

/// Running intersection of `{z : lhs(z) >= rhs(z)}` constraints.
struct Region {
    intervals: Vec<(f64, f64)>,
    scratch: Vec<(f64, f64)>,
    z_obs: f64,
}

impl Region {
    fn new(z_obs: f64) -> Self {
        Self { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)], scratch: Vec::new(), z_obs }
    }

    fn require(&mut self, lhs: QuadraticFn, rhs: QuadraticFn) {
        // Slack keeps the observed point inside despite rounding in either side.
        let slack = 1e-10 * (1.0 + lhs.eval(self.z_obs).abs());
        let mut d = lhs.snapped_difference(&rhs);
        d.q0 += slack;
        let (allowed, count) = nonneg_set(&d);
        if count == usize::MAX {
            return;
        }
        self.scratch.clear();
        for &(lo, hi) in &self.intervals {
            for &(alo, ahi) in &allowed[..count] {
                let (l, h) = (lo.max(alo), hi.min(ahi));
                if l <= h {
                    self.scratch.push((l, h));
                }
            }
        }
        std::mem::swap(&mut self.intervals, &mut self.scratch);
    }

    fn finish(self) -> Result<IntervalSet> {
        let set = IntervalSet::new(self.intervals)?;
        if !set.contains_within(self.z_obs, 1e-9) {
            return Err(Error::EmptyRegion(format!(
                "over-conditioned region {set} does not contain the observed statistic {}",
                self.z_obs
            )));
        }
        Ok(set)
    }
}

/// `{z : d(z) >= 0}` as at most two sorted intervals; a count of
/// `usize::MAX` means the whole line.
fn nonneg_set(d: &QuadraticFn) -> ([(f64, f64); 2], usize) {
    const INF: f64 = f64::INFINITY;
    let mut out = [(0.0, 0.0); 2];
    let count = match d.roots() {
        _ if d.q2 == 0.0 && d.q1 == 0.0 => {
            if d.q0 >= 0.0 {
                usize::MAX
            } else {
                0
            }
        }
        Roots::One(r) => {
            out[0] = if d.q1 > 0.0 { (r, INF) } else { (-INF, r) };
            1
        }
        Roots::None | Roots::Double(_) if d.q2 > 0.0 => usize::MAX,
        Roots::None => 0,
        Roots::Double(r) => {
            out[0] = (r, r);
            1
        }
        Roots::Two(r1, r2) if d.q2 > 0.0 => {
            out = [(-INF, r1), (r2, INF)];
            2
        }
        Roots::Two(r1, r2) => {
            out[0] = (r1, r2);
            1
        }
    };
    (out, count)
}

/// Region of `z` where every fixed-`K` DP cell selects the observed sub-vector.
pub fn oc_truncation_region(table: &DpTable, line: &LineEmbedding, z_obs: f64) -> Result<IntervalSet> {
    let n_total = table.len();
    if line.len() != n_total {
        return Err(crate::error::validation!(
            "line has length {} but the table covers N = {n_total}",
            line.len()
        ));
    }
    let ms = table.min_segment_len();
    let k_max = table.max_k();
    let mut cell = vec![vec![QuadraticFn::ZERO; n_total + 1]; k_max + 1];
    for n in ms..=n_total {
        cell[0][n] = quad_segment_cost_unchecked(line, 1, n);
    }
    let mut region = Region::new(z_obs);
    for k in 1..=k_max {
        for n in (k + 1) * ms..=n_total {
            let best = table.last_changepoint(k, n);
            cell[k][n] = cell[k - 1][best] + quad_segment_cost_unchecked(line, best + 1, n);
            for m in k * ms..=n - ms {
                if m != best {
                    let alt = cell[k - 1][m] + quad_segment_cost_unchecked(line, m + 1, n);
                    region.require(alt, cell[k][n]);
                }
            }
        }
    }
    region.finish()
}

/// Penalized analogue of [`oc_truncation_region`].
pub fn oc_truncation_region_penalized(
    table: &PenalizedTable,
    line: &LineEmbedding,
    z_obs: f64,
) -> Result<IntervalSet> {
    let n_total = table.len();
    if line.len() != n_total {
        return Err(crate::error::validation!(
            "line has length {} but the table covers N = {n_total}",
            line.len()
        ));
    }
    let ms = table.min_segment_len();
    let beta = QuadraticFn::constant(table.beta());
    let mut cell = vec![QuadraticFn::ZERO; n_total + 1];
    let candidate = |cell: &[QuadraticFn], m: usize, n: usize| {
        let seg = quad_segment_cost_unchecked(line, m + 1, n);
        if m == 0 {
            seg
        } else {
            cell[m] + beta + seg
        }
    };
    let mut region = Region::new(z_obs);
    for n in ms..=n_total {
        let best = table.last_changepoint(n);
        cell[n] = candidate(&cell, best, n);
        let splits = std::iter::once(0).chain(ms..=n.saturating_sub(ms));
        for m in splits {
            if m != best {
                region.require(candidate(&cell, m, n), cell[n]);
            }
        }
    }
    region.finish()
}
