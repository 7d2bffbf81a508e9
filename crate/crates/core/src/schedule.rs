//! Logging schedules over iteration counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of 1-based iteration indices at which to log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    points: Vec<usize>,
}

impl Schedule {
    /// Geometric schedule from 1 to `total` with `count` points.
    ///
    /// Each point is `⌈exp(linspace(0, ln total, count))⌉`, then nudged to the
    /// next free integer on collision, so that when `total >= count` the
    /// result has exactly `count` distinct entries with first 1 and last
    /// `total`. When `total < count` every iteration is logged.
    pub fn geometric(total: usize, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Config(format!("log_points must be at least 2, got {count}")));
        }
        if total == 0 {
            return Err(Error::Config("iteration count must be positive".into()));
        }
        if total < count {
            return Ok(Self {
                points: (1..=total).collect(),
            });
        }
        let log_total = (total as f64).ln();
        let mut points = Vec::with_capacity(count);
        let mut prev = 0usize;
        for idx in 0..count {
            let g = (log_total * idx as f64 / (count - 1) as f64).exp();
            // exp(ln N) may land a few ulps above N
            let nearest = g.round();
            let c = if (g - nearest).abs() <= 1e-9 * g { nearest } else { g.ceil() };
            let lo = prev + 1;
            let hi = total - (count - 1 - idx);
            let c = (c as usize).clamp(lo, hi);
            points.push(c);
            prev = c;
        }
        Ok(Self { points })
    }

    /// Explicit schedule; entries must be positive and strictly increasing.
    pub fn explicit(points: Vec<usize>) -> Result<Self> {
        if points.first() == Some(&0) {
            return Err(Error::Config("schedule entries are 1-based".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("schedule must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// Every `stride`-th iteration up to and including `total`.
    pub fn every(total: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        let mut points: Vec<usize> = (stride..=total).step_by(stride).collect();
        if points.last() != Some(&total) && total > 0 {
            points.push(total);
        }
        Self::explicit(points)
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.points.last().copied()
    }

    /// Walks the schedule in lockstep with an iteration counter.
    pub(crate) fn cursor(&self) -> ScheduleCursor<'_> {
        ScheduleCursor {
            points: &self.points,
            next: 0,
        }
    }
}

pub(crate) struct ScheduleCursor<'a> {
    points: &'a [usize],
    next: usize,
}

impl ScheduleCursor<'_> {
    /// True when `iter` is the next scheduled point; advances past it.
    pub(crate) fn hit(&mut self, iter: usize) -> bool {
        if self.points.get(self.next) == Some(&iter) {
            self.next += 1;
            true
        } else {
            false
        }
    }
}
