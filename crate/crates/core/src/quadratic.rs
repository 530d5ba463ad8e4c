// SPDX-License-Identifier: MIT OR Apache-2.0

//! Univariate quadratics of the line parameter `z`.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_segment, CpVector, LineEmbedding};

/// Relative tolerance under which two coefficients are treated as equal.
pub const COEF_RTOL: f64 = 1e-12;

/// `q2 z^2 + q1 z + q0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFn {
    pub q2: f64,
    pub q1: f64,
    pub q0: f64,
}

impl QuadraticFn {
    pub const ZERO: QuadraticFn = QuadraticFn { q2: 0.0, q1: 0.0, q0: 0.0 };

    pub const fn new(q2: f64, q1: f64, q0: f64) -> Self {
        Self { q2, q1, q0 }
    }

    pub const fn constant(c: f64) -> Self {
        Self { q2: 0.0, q1: 0.0, q0: c }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        (self.q2 * z + self.q1) * z + self.q0
    }

    #[inline]
    pub fn slope(&self, z: f64) -> f64 {
        2.0 * self.q2 * z + self.q1
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.q2.abs().max(self.q1.abs()).max(self.q0.abs())
    }

    /// Coefficient-wise equality within `COEF_RTOL * (1 + max|coef|)`.
    pub fn same_function(&self, other: &QuadraticFn) -> bool {
        let tol = COEF_RTOL * (1.0 + self.max_abs_coef().max(other.max_abs_coef()));
        (self.q2 - other.q2).abs() <= tol
            && (self.q1 - other.q1).abs() <= tol
            && (self.q0 - other.q0).abs() <= tol
    }

    /// `self - other` with coefficients that vanish relative to their
    /// operands snapped to exactly zero.
    pub(crate) fn snapped_difference(&self, other: &QuadraticFn) -> QuadraticFn {
        let snap = |a: f64, b: f64| {
            let d = a - b;
            if d.abs() <= COEF_RTOL * (1.0 + a.abs().max(b.abs())) {
                0.0
            } else {
                d
            }
        };
        QuadraticFn::new(snap(self.q2, other.q2), snap(self.q1, other.q1), snap(self.q0, other.q0))
    }

    /// Real roots in ascending order, computed with the sign-matched formula.
    /// A double root is reported once; coefficients must already be snapped.
    pub(crate) fn roots(&self) -> Roots {
        let QuadraticFn { q2, q1, q0 } = *self;
        if q2 == 0.0 {
            if q1 == 0.0 {
                return Roots::None;
            }
            return Roots::One(-q0 / q1);
        }
        let disc = q1 * q1 - 4.0 * q2 * q0;
        if disc < 0.0 {
            return Roots::None;
        }
        if disc <= COEF_RTOL * q1 * q1 {
            return Roots::Double(-q1 / (2.0 * q2));
        }
        let sq = disc.sqrt();
        let t = -0.5 * (q1 + q1.signum() * sq);
        let (r1, r2) = if t == 0.0 {
            let r = (-q0 / q2).sqrt();
            (-r, r)
        } else {
            (t / q2, q0 / t)
        };
        if r1 <= r2 {
            Roots::Two(r1, r2)
        } else {
            Roots::Two(r2, r1)
        }
    }

    /// Infimum over the closed interval `[lo, hi]` (either end may be infinite).
    pub(crate) fn infimum_on(&self, lo: f64, hi: f64) -> f64 {
        let at = |z: f64| -> f64 {
            if z.is_finite() {
                self.eval(z)
            } else if self.q2 != 0.0 {
                if self.q2 > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else if self.q1 != 0.0 {
                if (self.q1 > 0.0) == (z > 0.0) {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                self.q0
            }
        };
        let mut m = at(lo).min(at(hi));
        if self.q2 > 0.0 {
            let v = -self.q1 / (2.0 * self.q2);
            if v >= lo && v <= hi {
                m = m.min(self.eval(v));
            }
        }
        m
    }
}

impl Add for QuadraticFn {
    type Output = QuadraticFn;
    fn add(self, o: QuadraticFn) -> QuadraticFn {
        QuadraticFn::new(self.q2 + o.q2, self.q1 + o.q1, self.q0 + o.q0)
    }
}

impl Sub for QuadraticFn {
    type Output = QuadraticFn;
    fn sub(self, o: QuadraticFn) -> QuadraticFn {
        QuadraticFn::new(self.q2 - o.q2, self.q1 - o.q1, self.q0 - o.q0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Roots {
    None,
    One(f64),
    Double(f64),
    Two(f64, f64),
}

/// Minimum separation between consecutive breakpoints.
#[inline]
pub(crate) fn breakpoint_guard(z: f64) -> f64 {
    if z.is_finite() {
        1e-10 * (1.0 + z.abs())
    } else {
        0.0
    }
}

/// Cost of segment `s..=e` of `x(z)` as a quadratic in `z`.
pub fn quad_segment_cost(line: &LineEmbedding, s: usize, e: usize) -> Result<QuadraticFn> {
    check_segment(s, e, line.len())?;
    Ok(quad_segment_cost_unchecked(line, s, e))
}

#[inline]
pub(crate) fn quad_segment_cost_unchecked(line: &LineEmbedding, s: usize, e: usize) -> QuadraticFn {
    let [sa, sb, saa, sbb, sab] = line.segment_sums(s, e);
    let len = (e + 1 - s) as f64;
    QuadraticFn::new(
        (sbb - sb * sb / len).max(0.0),
        2.0 * (sab - sa * sb / len),
        (saa - sa * sa / len).max(0.0),
    )
}

/// Loss of `tau` along the line; `beta` (if any) adds `beta * dim(tau)` to `q0`.
pub fn quad_loss(line: &LineEmbedding, tau: &CpVector, beta: Option<f64>) -> Result<QuadraticFn> {
    tau.validate(line.len())?;
    if let Some(b) = beta {
        crate::model::check_beta(b)?;
    }
    let mut acc = QuadraticFn::ZERO;
    for (s, e) in tau.segments(line.len()) {
        acc = acc + quad_segment_cost_unchecked(line, s, e);
    }
    if let Some(b) = beta {
        acc.q0 += b * tau.dim() as f64;
    }
    Ok(acc)
}

/// Smallest root of `f - g` beyond `z_low` (plus the breakpoint guard).
///
/// Tangential contacts (double roots) do not change which function is lower
/// and are skipped.
pub fn intersect_after(f: &QuadraticFn, g: &QuadraticFn, z_low: f64) -> Result<Option<f64>> {
    if f.same_function(g) {
        return Err(Error::IdenticalFunctions(format!("{f:?} and {g:?}")));
    }
    let lim = z_low + breakpoint_guard(z_low);
    let d = f.snapped_difference(g);
    Ok(match d.roots() {
        Roots::None | Roots::Double(_) => None,
        Roots::One(r) => (r > lim).then_some(r),
        Roots::Two(r1, r2) => {
            if r1 > lim {
                Some(r1)
            } else if r2 > lim {
                Some(r2)
            } else {
                None
            }
        }
    })
}

/// Whether `f(z) - slack > g(z)` for every real `z`.
pub fn dominated_everywhere(f: &QuadraticFn, g: &QuadraticFn, slack: f64) -> bool {
    let shifted = QuadraticFn::new(f.q2, f.q1, f.q0 - slack);
    let d = shifted.snapped_difference(g);
    if d.q2 > 0.0 {
        d.q1 * d.q1 - 4.0 * d.q2 * d.q0 < 0.0
    } else {
        d.q2 == 0.0 && d.q1 == 0.0 && d.q0 > 0.0
    }
}
