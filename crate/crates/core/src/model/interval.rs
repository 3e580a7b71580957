use std::fmt;

use rand::Rng;

/// `i64::MIN` stands for −∞.
pub const NEG_INF: i64 = i64::MIN;
/// `i64::MAX` stands for +∞.
pub const POS_INF: i64 = i64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntervalError {
    #[error("cannot sample from an empty interval set")]
    Empty,
}

/// A finite union of closed integer intervals over the sentinel-bounded line.
///
/// Stored intervals are sorted, non-empty, and separated by gaps of at least
/// one integer, so equal sets have equal representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IntervalSet {
    intervals: Vec<(i64, i64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalSet { intervals: vec![(NEG_INF, POS_INF)] }
    }

    /// `[lo, hi]`, empty when `lo > hi`.
    pub fn range(lo: i64, hi: i64) -> Self {
        if lo > hi {
            Self::empty()
        } else {
            IntervalSet { intervals: vec![(lo, hi)] }
        }
    }

    pub fn point(v: i64) -> Self {
        Self::range(v, v)
    }

    pub fn at_least(lo: i64) -> Self {
        Self::range(lo, POS_INF)
    }

    pub fn at_most(hi: i64) -> Self {
        Self::range(NEG_INF, hi)
    }

    /// Normalizes an arbitrary list of `(lo, hi)` pairs; pairs with
    /// `lo > hi` are dropped and overlapping or adjacent pairs merged.
    pub fn from_intervals(intervals: impl IntoIterator<Item = (i64, i64)>) -> Self {
        let mut v: Vec<(i64, i64)> = intervals.into_iter().filter(|&(lo, hi)| lo <= hi).collect();
        v.sort_unstable();
        let mut out: Vec<(i64, i64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if (lo as i128) <= last.1 as i128 + 1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.intervals == [(NEG_INF, POS_INF)]
    }

    pub fn contains(&self, v: i64) -> bool {
        let idx = self.intervals.partition_point(|&(_, hi)| hi < v);
        self.intervals.get(idx).is_some_and(|&(lo, _)| lo <= v)
    }

    pub fn min(&self) -> Option<i64> {
        self.intervals.first().map(|&(lo, _)| lo)
    }

    pub fn max(&self) -> Option<i64> {
        self.intervals.last().map(|&(_, hi)| hi)
    }

    /// The stored interval containing `v`, if any.
    pub fn component_of(&self, v: i64) -> Option<(i64, i64)> {
        let idx = self.intervals.partition_point(|&(_, hi)| hi < v);
        self.intervals.get(idx).copied().filter(|&(lo, _)| lo <= v)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::from_intervals(self.intervals.iter().chain(other.intervals.iter()).copied())
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
        IntervalSet { intervals: out }
    }

    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut next = Some(NEG_INF);
        for &(lo, hi) in &self.intervals {
            if let Some(start) = next {
                if lo > start {
                    out.push((start, lo - 1));
                }
            }
            next = hi.checked_add(1);
        }
        if let Some(start) = next {
            out.push((start, POS_INF));
        }
        IntervalSet { intervals: out }
    }

    /// Number of members, which can reach 2^64.
    pub fn cardinality(&self) -> u128 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| (hi as i128 - lo as i128 + 1) as u128)
            .sum()
    }

    /// Draws a member uniformly at random.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<i64, IntervalError> {
        let total = self.cardinality();
        if total == 0 {
            return Err(IntervalError::Empty);
        }
        let mut r = rng.gen_range(0..total);
        for &(lo, hi) in &self.intervals {
            let width = (hi as i128 - lo as i128 + 1) as u128;
            if r < width {
                return Ok((lo as i128 + r as i128) as i64);
            }
            r -= width;
        }
        unreachable!("offset below total cardinality")
    }

    /// Truncates infinite rays to `window` integers beyond their finite
    /// endpoint; the full line becomes `[−window, window]`.
    pub fn cap(&self, window: u64) -> IntervalSet {
        let w = window.min(i64::MAX as u64) as i64;
        Self::from_intervals(self.intervals.iter().map(|&(lo, hi)| match (lo == NEG_INF, hi == POS_INF) {
            (true, true) => (-w, w),
            (true, false) => (hi.saturating_sub(w), hi),
            (false, true) => (lo, lo.saturating_add(w)),
            (false, false) => (lo, hi),
        }))
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        let bound = |v: i64| match v {
            NEG_INF => "-inf".to_string(),
            POS_INF => "+inf".to_string(),
            v => v.to_string(),
        };
        for (i, &(lo, hi)) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {}]", bound(lo), bound(hi))?;
        }
        Ok(())
    }
}
