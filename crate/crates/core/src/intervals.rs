//! Finite unions of disjoint closed subintervals of `[0, 1]`.
//!
//! This is the set class on which capacities are evaluated: every superlevel
//! set of a piecewise linear or step function, intersected with an interval
//! union, is again an interval union. Degenerate parts `[a, a]` are kept so
//! that superlevel sets at a peak value remain representable.

use serde::Serialize;

use crate::error::{Error, Result};

/// Parts separated by a gap smaller than this are merged on construction.
pub const MERGE_GAP: f64 = 1e-12;

/// A normalized finite union of closed intervals inside `[0, 1]`.
///
/// Parts are sorted, pairwise disjoint and separated by gaps of at least
/// [`MERGE_GAP`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct IntervalUnion {
    parts: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { parts: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalUnion {
            parts: vec![(0.0, 1.0)],
        }
    }

    /// The single closed interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    /// Builds a union from arbitrary parts, merging overlapping, touching and
    /// nearly touching ones.
    ///
    /// Endpoints within `1e-12` outside `[0, 1]` are clamped; anything further
    /// out, `lo > hi`, or a non-finite endpoint is a domain error.
    pub fn new(parts: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut checked = Vec::new();
        for (lo, hi) in parts {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain(format!("non-finite interval [{lo}, {hi}]")));
            }
            if lo < -MERGE_GAP || hi > 1.0 + MERGE_GAP || lo > hi {
                return Err(Error::domain(format!(
                    "interval [{lo}, {hi}] is not a closed subinterval of [0, 1]"
                )));
            }
            checked.push((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)));
        }
        Ok(Self::normalize(checked))
    }

    /// Normalizes parts that are already known to lie in `[0, 1]` with `lo <= hi`.
    pub(crate) fn from_valid_parts(parts: Vec<(f64, f64)>) -> Self {
        debug_assert!(parts
            .iter()
            .all(|&(lo, hi)| (0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0));
        Self::normalize(parts)
    }

    fn normalize(mut parts: Vec<(f64, f64)>) -> Self {
        if parts.len() > 1 {
            parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (lo, hi) in parts {
            match merged.last_mut() {
                Some(last) if lo - last.1 < MERGE_GAP => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        IntervalUnion { parts: merged }
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Lebesgue measure of the union.
    pub fn length(&self) -> f64 {
        self.parts.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.parts.iter().any(|&(lo, hi)| lo <= t && t <= hi)
    }

    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let (a, b) = (&self.parts, &other.parts);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
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
        Self::normalize(out)
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut parts = self.parts.clone();
        parts.extend_from_slice(&other.parts);
        Self::normalize(parts)
    }

    /// True when every part of `self` lies inside some part of `other`.
    pub fn is_subset_of(&self, other: &IntervalUnion) -> bool {
        self.parts
            .iter()
            .all(|&(lo, hi)| other.parts.iter().any(|&(olo, ohi)| olo <= lo && hi <= ohi))
    }

    /// Smallest and largest point of the union.
    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.parts.first()?.0, self.parts.last()?.1))
    }
}
