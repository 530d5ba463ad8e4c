// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

/// Sorted union of disjoint closed intervals of the real line.
///
/// The first interval may start at `-inf` and the last may end at `+inf`.
/// Touching or overlapping intervals are merged on construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn real_line() -> Self {
        Self { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(validation!("invalid interval [{lo}, {hi}]"));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::merge_sorted(intervals))
    }

    fn merge_sorted(intervals: Vec<(f64, f64)>) -> Self {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_real_line(&self) -> bool {
        self.intervals.len() == 1
            && self.intervals[0].0 == f64::NEG_INFINITY
            && self.intervals[0].1 == f64::INFINITY
    }

    pub fn contains(&self, z: f64) -> bool {
        self.contains_within(z, 0.0)
    }

    /// Membership allowing each endpoint to move outward by `tol * (1 + |endpoint|)`.
    pub fn contains_within(&self, z: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| z >= lo - slack(tol, lo) && z <= hi + slack(tol, hi))
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::merge_sorted(out)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all: Vec<(f64, f64)> = self.intervals.iter().chain(&other.intervals).copied().collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::merge_sorted(all)
    }

    /// Whether every interval of `self` lies inside some interval of `other`,
    /// allowing endpoints to differ by `tol * (1 + |endpoint|)`.
    pub fn is_subset_of(&self, other: &IntervalSet, tol: f64) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other.intervals.iter().any(|&(olo, ohi)| {
                lo >= olo - slack(tol, olo) && hi <= ohi + slack(tol, ohi)
            })
        })
    }
}

fn slack(tol: f64, endpoint: f64) -> f64 {
    if endpoint.is_finite() {
        tol * (1.0 + endpoint.abs())
    } else {
        0.0
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, (lo, hi)) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " U ")?;
            }
            write!(f, "[{lo}, {hi}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn merges_touching_intervals() {
        let s = IntervalSet::new(vec![(2.0, INF), (0.0, 2.0), (-5.0, -4.0)]).unwrap();
        assert_eq!(s.intervals(), &[(-5.0, -4.0), (0.0, INF)]);
        assert!(IntervalSet::new(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn intersection_and_subset() {
        let a = IntervalSet::new(vec![(-INF, -1.0), (1.0, INF)]).unwrap();
        let b = IntervalSet::new(vec![(-2.0, 3.0)]).unwrap();
        let c = a.intersect(&b);
        assert_eq!(c.intervals(), &[(-2.0, -1.0), (1.0, 3.0)]);
        assert!(c.is_subset_of(&a, 0.0));
        assert!(c.is_subset_of(&b, 0.0));
        assert!(!b.is_subset_of(&a, 1e-7));
        assert!(a.contains(-1.0) && !a.contains(0.0));
        assert!(IntervalSet::real_line().is_real_line());
        assert!(a.intersect(&IntervalSet::empty()).is_empty());
        assert_eq!(a.union(&b).intervals(), &[(-INF, INF)]);
    }
}
