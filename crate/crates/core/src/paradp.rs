// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parametric dynamic programming: the optimal changepoint vector of
//! `x(z) = a + b z` for every real `z` at once.
//!
//! Each DP cell stores the changepoint vectors that are optimal for at least
//! one `z` together with the lower envelope of their losses. A cell's
//! candidates are concatenations of the optimal sets of smaller cells, so
//! only vectors whose every prefix was optimal somewhere are ever examined.
//!
//! With pruning on, a row is swept with `n` innermost and the candidate list
//! of `(k, n - 1)` is carried into `(k, n)`. Before carrying, any vector whose
//! loss exceeds the envelope of `(k - 1, n - 1)` everywhere is dropped; such a
//! vector is beaten by splitting at `n - 1` for every larger `n`. In penalized
//! mode the carried list drops a vector once its loss minus `beta` exceeds the
//! envelope of the current cell everywhere.

use crate::envelope::{dedup_candidates, para_cp, Envelope, PiecewiseSolution};
use crate::error::{validation, Result};
use crate::model::{check_beta, CpVector, LineEmbedding};
use crate::quadratic::{quad_segment_cost_unchecked, QuadraticFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParaDpOptions {
    pub pruning: bool,
    pub min_segment_len: usize,
    /// Keep every solved cell in the output for inspection.
    pub retain_cells: bool,
}

impl Default for ParaDpOptions {
    fn default() -> Self {
        Self { pruning: true, min_segment_len: 1, retain_cells: false }
    }
}

impl ParaDpOptions {
    /// Carry-and-prune relies on splitting at `n - 1`, which needs unit minimum segments.
    fn prunes(&self) -> bool {
        self.pruning && self.min_segment_len == 1
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    cps: CpVector,
    /// Loss of everything up to and including the last changepoint.
    prefix: QuadraticFn,
    last: usize,
}

impl Candidate {
    fn qf(&self, line: &LineEmbedding, n: usize) -> QuadraticFn {
        self.prefix + quad_segment_cost_unchecked(line, self.last + 1, n)
    }
}

/// A changepoint vector optimal somewhere along the line, with its loss.
#[derive(Clone, Debug, PartialEq)]
pub struct OptMember {
    pub cps: CpVector,
    pub qf: QuadraticFn,
}

/// Solved DP cell.
#[derive(Clone, Debug)]
pub struct ParaDpCell {
    /// Row index for fixed-`K` tables, `None` in penalized mode.
    pub k: Option<usize>,
    pub n: usize,
    pub members: Vec<OptMember>,
    /// Pieces index into `members`.
    pub path: PiecewiseSolution<usize>,
    /// Size of the candidate set handed to the envelope routine.
    pub candidate_count: usize,
}

impl ParaDpCell {
    pub fn envelope(&self) -> Envelope {
        Envelope::new(&self.path, |i| self.members[i].qf)
    }

    fn into_path(self) -> ParametricPath {
        let (vectors, qfs) = self.members.into_iter().map(|m| (m.cps, m.qf)).unzip();
        ParametricPath { vectors, qfs, solution: self.path }
    }
}

/// Optimal changepoint vector as a function of `z`.
#[derive(Clone, Debug)]
pub struct ParametricPath {
    vectors: Vec<CpVector>,
    qfs: Vec<QuadraticFn>,
    solution: PiecewiseSolution<usize>,
}

impl ParametricPath {
    pub fn vectors(&self) -> &[CpVector] {
        &self.vectors
    }

    pub fn qfs(&self) -> &[QuadraticFn] {
        &self.qfs
    }

    /// Pieces index into [`ParametricPath::vectors`].
    pub fn solution(&self) -> &PiecewiseSolution<usize> {
        &self.solution
    }

    pub fn cp_at(&self, z: f64) -> &CpVector {
        &self.vectors[self.solution.piece_at(z)]
    }

    pub fn loss_at(&self, z: f64) -> f64 {
        self.qfs[self.solution.piece_at(z)].eval(z)
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, &CpVector)> + '_ {
        self.solution.intervals().map(|(lo, hi, i)| (lo, hi, &self.vectors[i]))
    }

    /// Pieces overlapping `[lo, hi]`, clipped to it. Diagnostic only.
    pub fn clipped(&self, lo: f64, hi: f64) -> Vec<(f64, f64, &CpVector)> {
        self.intervals()
            .filter(|&(a, b, _)| b >= lo && a <= hi)
            .map(|(a, b, v)| (a.max(lo), b.min(hi), v))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ParaDpOutput {
    pub path: ParametricPath,
    /// Every solved cell, when requested through [`ParaDpOptions::retain_cells`].
    pub cells: Vec<ParaDpCell>,
    /// Total candidates passed to the envelope routine over all cells.
    pub candidates_examined: usize,
}

fn solve_cell(
    line: &LineEmbedding,
    k: Option<usize>,
    n: usize,
    candidates: &[Candidate],
) -> Result<ParaDpCell> {
    // Rank candidates lexicographically so ties resolve to the smallest vector.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[i].cps.cmp(&candidates[j].cps));
    let ranked: Vec<(usize, QuadraticFn)> = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| (rank, candidates[i].qf(line, n)))
        .collect();
    let reps = dedup_candidates(&ranked);
    let sol = para_cp(&reps)?;

    let mut members: Vec<OptMember> = Vec::new();
    let mut member_of_rank: Vec<(usize, usize)> = Vec::new();
    let pieces: Vec<usize> = sol
        .pieces()
        .iter()
        .map(|&rank| {
            if let Some(&(_, m)) = member_of_rank.iter().find(|(r, _)| *r == rank) {
                return m;
            }
            let m = members.len();
            members.push(OptMember { cps: candidates[order[rank]].cps.clone(), qf: ranked[rank].1 });
            member_of_rank.push((rank, m));
            m
        })
        .collect();
    Ok(ParaDpCell {
        k,
        n,
        members,
        path: PiecewiseSolution::from_parts(sol.breakpoints().to_vec(), pieces),
        candidate_count: candidates.len(),
    })
}

/// Path of optimal `K`-changepoint vectors of the line for all `z`.
pub fn para_dp_fixed_k(line: &LineEmbedding, k_max: usize, opts: ParaDpOptions) -> Result<ParaDpOutput> {
    let n_total = line.len();
    let ms = opts.min_segment_len;
    if ms == 0 {
        return Err(validation!("minimum segment length must be >= 1"));
    }
    if k_max == 0 || k_max + 1 > n_total {
        return Err(validation!("K must lie in 1..={}, got {k_max}", n_total.saturating_sub(1)));
    }
    if (k_max + 1) * ms > n_total {
        return Err(validation!(
            "{k_max} changepoints with minimum segment length {ms} do not fit in N = {n_total}"
        ));
    }
    let mut retained = Vec::new();
    let mut examined = 0usize;

    // Row 0: the empty vector, cost of the whole prefix.
    let mut prev: Vec<Option<ParaDpCell>> = vec![None; n_total + 1];
    for (n, slot) in prev.iter_mut().enumerate().take(n_total - k_max * ms + 1).skip(ms) {
        let qf = quad_segment_cost_unchecked(line, 1, n);
        let cell = ParaDpCell {
            k: Some(0),
            n,
            members: vec![OptMember { cps: CpVector::empty(), qf }],
            path: PiecewiseSolution::from_parts(vec![f64::NEG_INFINITY], vec![0]),
            candidate_count: 1,
        };
        if opts.retain_cells {
            retained.push(cell.clone());
        }
        *slot = Some(cell);
    }

    for k in 1..=k_max {
        let lo = (k + 1) * ms;
        let hi = n_total - (k_max - k) * ms;
        let mut row: Vec<Option<ParaDpCell>> = vec![None; n_total + 1];
        if opts.prunes() {
            let mut carried: Vec<Candidate> = Vec::new();
            for n in lo..=hi {
                let m = n - 1;
                let below = prev[m].as_ref().expect("row k-1 covers every split point");
                carried.extend(below.members.iter().map(|mem| Candidate {
                    cps: mem.cps.concat(m),
                    prefix: mem.qf,
                    last: m,
                }));
                let cell = solve_cell(line, Some(k), n, &carried)?;
                examined += carried.len();
                if n < hi {
                    let env = prev[n].as_ref().expect("row k-1 covers n").envelope();
                    carried.retain(|c| !env.is_exceeded_by(&c.qf(line, n), 0.0));
                }
                if opts.retain_cells {
                    retained.push(cell.clone());
                }
                row[n] = Some(cell);
            }
        } else {
            let first = if k == k_max { n_total } else { lo };
            for n in first..=hi {
                let mut cands = Vec::new();
                for m in k * ms..=n - ms {
                    if let Some(below) = prev[m].as_ref() {
                        cands.extend(below.members.iter().map(|mem| Candidate {
                            cps: mem.cps.concat(m),
                            prefix: mem.qf,
                            last: m,
                        }));
                    }
                }
                let cell = solve_cell(line, Some(k), n, &cands)?;
                examined += cands.len();
                if opts.retain_cells {
                    retained.push(cell.clone());
                }
                row[n] = Some(cell);
            }
        }
        prev = row;
    }
    let last = prev[n_total].take().expect("final cell solved");
    Ok(ParaDpOutput { path: last.into_path(), cells: retained, candidates_examined: examined })
}

/// Path of optimal penalized changepoint vectors (any dimension) for all `z`.
pub fn para_dp_penalized(line: &LineEmbedding, beta: f64, opts: ParaDpOptions) -> Result<ParaDpOutput> {
    check_beta(beta)?;
    let n_total = line.len();
    let ms = opts.min_segment_len;
    if ms == 0 || ms > n_total {
        return Err(validation!("minimum segment length must lie in 1..={n_total}"));
    }
    let mut retained = Vec::new();
    let mut examined = 0usize;
    let mut cells: Vec<Option<ParaDpCell>> = vec![None; n_total + 1];
    let concat_all = |cell: &ParaDpCell, m: usize, out: &mut Vec<Candidate>| {
        out.extend(cell.members.iter().map(|mem| Candidate {
            cps: mem.cps.concat(m),
            prefix: QuadraticFn::new(mem.qf.q2, mem.qf.q1, mem.qf.q0 + beta),
            last: m,
        }));
    };
    let empty = Candidate { cps: CpVector::empty(), prefix: QuadraticFn::ZERO, last: 0 };

    if opts.prunes() {
        let mut carried: Vec<Candidate> = vec![empty];
        for n in 1..=n_total {
            if n >= 2 {
                let below = cells[n - 1].as_ref().expect("previous cell solved");
                concat_all(below, n - 1, &mut carried);
            }
            let cell = solve_cell(line, None, n, &carried)?;
            examined += carried.len();
            if n < n_total {
                let env = cell.envelope();
                carried.retain(|c| !env.is_exceeded_by(&c.qf(line, n), beta));
                // Only the previous cell is needed from here on.
                if n >= 2 && !opts.retain_cells {
                    cells[n - 1] = None;
                }
            }
            if opts.retain_cells {
                retained.push(cell.clone());
            }
            cells[n] = Some(cell);
        }
    } else {
        for n in ms..=n_total {
            let mut cands = vec![empty.clone()];
            for m in ms..=n.saturating_sub(ms) {
                if let Some(below) = cells[m].as_ref() {
                    concat_all(below, m, &mut cands);
                }
            }
            let cell = solve_cell(line, None, n, &cands)?;
            examined += cands.len();
            if opts.retain_cells {
                retained.push(cell.clone());
            }
            cells[n] = Some(cell);
        }
    }
    let last = cells[n_total].take().expect("final cell solved");
    Ok(ParaDpOutput { path: last.into_path(), cells: retained, candidates_examined: examined })
}
