use serde::{Deserialize, Serialize};

use super::MapperError;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Ordered set of overlapping intervals covering a filter's range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCover {
    pub intervals: Vec<Interval>,
}

impl IntervalCover {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Indices of every interval containing `x`.
    pub fn containing(&self, x: f64) -> impl Iterator<Item = usize> + '_ {
        self.intervals
            .iter()
            .enumerate()
            .filter(move |(_, iv)| iv.contains(x))
            .map(|(i, _)| i)
    }
}

/// Uniform cover of `[lo, hi]` by `n` intervals with fractional overlap `p`.
///
/// Interval `i` is centred at `lo + (i + 0.5) w` with `w = (hi - lo) / n` and
/// has half-width `w / (2 (1 - p))`, so consecutive intervals overlap by a
/// fraction `p` of their length. A degenerate range yields the single
/// interval `[lo, hi]`.
pub fn build_interval_cover(lo: f64, hi: f64, n: usize, p: f64) -> Result<IntervalCover, MapperError> {
    if !(0.0..1.0).contains(&p) {
        return Err(MapperError::InvalidOverlap(p));
    }
    if n < 1 {
        return Err(MapperError::InvalidCount(n));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(MapperError::InvalidRange { lo, hi });
    }
    if hi == lo {
        return Ok(IntervalCover {
            intervals: vec![Interval { lo, hi }],
        });
    }
    let w = (hi - lo) / n as f64;
    let r = w / (2.0 * (1.0 - p));
    let mut intervals: Vec<Interval> = (0..n)
        .map(|i| {
            let c = lo + (i as f64 + 0.5) * w;
            Interval { lo: c - r, hi: c + r }
        })
        .collect();

    // Rounding may leave the outer ends or a zero-overlap seam a few ulps short.
    if let Some(first) = intervals.first_mut() {
        first.lo = first.lo.min(lo);
    }
    if let Some(last) = intervals.last_mut() {
        last.hi = last.hi.max(hi);
    }
    for i in 1..intervals.len() {
        if intervals[i - 1].hi < intervals[i].lo {
            intervals[i - 1].hi = intervals[i].lo;
        }
    }
    Ok(IntervalCover { intervals })
}

/// A cover element of a two-filter cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub index: (usize, usize),
    pub x: Interval,
    pub y: Interval,
}

impl Rectangle {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x.contains(x) && self.y.contains(y)
    }
}

/// All `n1 * n2` rectangles of the product cover, in row-major index order.
pub fn build_product_cover(c1: &IntervalCover, c2: &IntervalCover) -> Vec<Rectangle> {
    c1.intervals
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| {
            c2.intervals
                .iter()
                .enumerate()
                .map(move |(j, &y)| Rectangle { index: (i, j), x, y })
        })
        .collect()
}
