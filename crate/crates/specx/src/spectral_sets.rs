//! Closed subsets of the real line made of finitely many closed intervals
//! and isolated points, with the set arithmetic the spectral assembly needs:
//! unions, closures of unions, Minkowski sums and Hausdorff distances.
//!
//! Values are kept in a canonical form (sorted pairwise-disjoint intervals
//! with strictly positive gaps, plus sorted points lying outside every
//! interval), so equality of canonical forms is plain `==`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by [`SpectralSet::closure_union`] to absorb points that
/// are limits of interval endpoints.
pub const CLOSURE_ABSORB_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetError {
    #[error("operation requires nonempty operands")]
    EmptyOperand,
}

/// A finite union of closed intervals and isolated points, canonical form.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SpectralSet {
    intervals: Vec<(f64, f64)>,
    points: Vec<f64>,
}

impl SpectralSet {
    pub fn empty() -> Self {
        SpectralSet {
            intervals: Vec::new(),
            points: Vec::new(),
        }
    }

    pub fn point(p: f64) -> Self {
        SpectralSet {
            intervals: Vec::new(),
            points: vec![p],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::canonicalize(vec![(lo, hi)], Vec::new())
    }

    pub fn from_parts(intervals: Vec<(f64, f64)>, points: Vec<f64>) -> Self {
        Self::canonicalize(intervals, points)
    }

    /// Core normalization: merge touching/overlapping intervals, demote
    /// degenerate intervals to points, drop points covered by intervals.
    fn canonicalize(intervals: Vec<(f64, f64)>, points: Vec<f64>) -> Self {
        let mut iv: Vec<(f64, f64)> = intervals
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        for &(a, b) in &iv {
            assert!(
                a.is_finite() && b.is_finite(),
                "non-finite interval endpoint"
            );
        }
        iv.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }

        let mut pts: Vec<f64> = points;
        for &p in &pts {
            assert!(p.is_finite(), "non-finite point");
        }
        // degenerate intervals are points
        merged.retain(|&(a, b)| {
            if a == b {
                pts.push(a);
                false
            } else {
                true
            }
        });
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        pts.retain(|&p| !merged.iter().any(|&(a, b)| a <= p && p <= b));

        SpectralSet {
            intervals: merged,
            points: pts,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty() && self.points.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> Option<f64> {
        let i = self.intervals.first().map(|&(a, _)| a);
        let p = self.points.first().copied();
        match (i, p) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    pub fn max(&self) -> Option<f64> {
        let i = self.intervals.last().map(|&(_, b)| b);
        let p = self.points.last().copied();
        match (i, p) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    /// All connected components as closed segments (points are degenerate
    /// segments), sorted.
    pub fn components(&self) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .copied()
            .chain(self.points.iter().map(|&p| (p, p)))
            .collect();
        c.sort_by(|x, y| x.partial_cmp(y).unwrap());
        c
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b) || self.points.contains(&x)
    }

    /// Distance from `x` to the set; `None` when the set is empty.
    pub fn distance_to(&self, x: f64) -> Option<f64> {
        let comps = self.components();
        if comps.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        for &(a, b) in &comps {
            let d = if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                0.0
            };
            if d < best {
                best = d;
            }
        }
        Some(best)
    }

    /// Builds a set from a sorted sample cloud: consecutive samples closer
    /// than `merge_gap` fuse into one interval, singletons become points.
    pub fn from_samples(values: &[f64], merge_gap: f64) -> Self {
        assert!(merge_gap > 0.0, "merge_gap must be positive");
        let mut intervals = Vec::new();
        let mut points = Vec::new();
        let mut i = 0;
        while i < values.len() {
            let start = values[i];
            let mut end = start;
            let mut j = i + 1;
            while j < values.len() && values[j] - end < merge_gap {
                end = values[j];
                j += 1;
            }
            if end > start {
                intervals.push((start, end));
            } else {
                points.push(start);
            }
            i = j;
        }
        Self::canonicalize(intervals, points)
    }

    /// Sample fusion with a locally adaptive gap: a pair of consecutive
    /// samples fuses when its gap is below 4x the mean spacing over a
    /// moving window. Finite-section eigenvalues of a band fill it with
    /// spacing O(1/N); this reconstructs intervals without absorbing true
    /// gaps of width much larger than 1/N.
    pub fn from_samples_adaptive(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::empty();
        }
        if n == 1 {
            return Self::point(values[0]);
        }
        let gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let w = 16usize;
        let mut intervals = Vec::new();
        let mut points = Vec::new();
        let mut start = values[0];
        let mut end = values[0];
        for (i, &g) in gaps.iter().enumerate() {
            let lo = i.saturating_sub(w);
            let hi = (i + w + 1).min(gaps.len());
            let local_mean = gaps[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            let threshold = (4.0 * local_mean).max(1e-12);
            if g < threshold {
                end = values[i + 1];
            } else {
                if end > start {
                    intervals.push((start, end));
                } else {
                    points.push(start);
                }
                start = values[i + 1];
                end = start;
            }
        }
        if end > start {
            intervals.push((start, end));
        } else {
            points.push(start);
        }
        Self::canonicalize(intervals, points)
    }

    pub fn union(&self, other: &SpectralSet) -> SpectralSet {
        let mut iv = self.intervals.clone();
        iv.extend_from_slice(&other.intervals);
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::canonicalize(iv, pts)
    }

    /// Union of many sets, then absorption of points that sit within
    /// [`CLOSURE_ABSORB_TOL`] of an interval (finite-precision closure).
    pub fn closure_union(sets: &[SpectralSet]) -> SpectralSet {
        let mut u = SpectralSet::empty();
        for s in sets {
            u = u.union(s);
        }
        let mut iv = u.intervals;
        let mut pts = Vec::new();
        'next_point: for p in u.points {
            for seg in iv.iter_mut() {
                if p >= seg.0 - CLOSURE_ABSORB_TOL && p <= seg.1 + CLOSURE_ABSORB_TOL {
                    seg.0 = seg.0.min(p);
                    seg.1 = seg.1.max(p);
                    continue 'next_point;
                }
            }
            pts.push(p);
        }
        Self::canonicalize(iv, pts)
    }

    pub fn minkowski_sum(&self, other: &SpectralSet) -> Result<SpectralSet, SetError> {
        if self.is_empty() || other.is_empty() {
            return Err(SetError::EmptyOperand);
        }
        let a = self.components();
        let b = other.components();
        let mut iv = Vec::with_capacity(a.len() * b.len());
        let mut pts = Vec::new();
        for &(a0, a1) in &a {
            for &(b0, b1) in &b {
                let lo = a0 + b0;
                let hi = a1 + b1;
                if lo == hi {
                    pts.push(lo);
                } else {
                    iv.push((lo, hi));
                }
            }
        }
        Ok(Self::canonicalize(iv, pts))
    }

    /// sup over `self` of the distance to `other`, computed exactly from
    /// component endpoints: inside a gap of `other` the distance peaks at
    /// the gap midpoint (clamped to the component of `self` probing it).
    pub fn one_sided_hausdorff(&self, other: &SpectralSet) -> Result<f64, SetError> {
        if self.is_empty() || other.is_empty() {
            return Err(SetError::EmptyOperand);
        }
        let to = other.components();
        let mut worst = 0.0f64;
        let dist = |x: f64| -> f64 {
            let mut best = f64::INFINITY;
            for &(a, b) in &to {
                let d = if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                };
                best = best.min(d);
            }
            best
        };
        for &(s0, s1) in &self.components() {
            worst = worst.max(dist(s0)).max(dist(s1));
            // interior candidates: midpoints of other's gaps clipped to [s0, s1]
            for w in to.windows(2) {
                let (g0, g1) = (w[0].1, w[1].0);
                if g1 <= s0 || g0 >= s1 {
                    continue;
                }
                let mid = 0.5 * (g0 + g1);
                let x = mid.clamp(s0, s1);
                if x > g0 && x < g1 {
                    worst = worst.max((x - g0).min(g1 - x));
                }
            }
        }
        Ok(worst)
    }

    pub fn hausdorff(&self, other: &SpectralSet) -> Result<f64, SetError> {
        Ok(self
            .one_sided_hausdorff(other)?
            .max(other.one_sided_hausdorff(self)?))
    }

    /// Exact subset check on canonical forms.
    pub fn is_subset_of(&self, other: &SpectralSet) -> bool {
        let covers = |a: f64, b: f64| -> bool {
            other.intervals.iter().any(|&(x, y)| x <= a && b <= y)
                || (a == b && other.points.contains(&a))
        };
        self.intervals.iter().all(|&(a, b)| covers(a, b))
            && self.points.iter().all(|&p| covers(p, p))
    }

    /// Translate the whole set by `c` (exact endpoint arithmetic).
    pub fn shifted(&self, c: f64) -> SpectralSet {
        SpectralSet {
            intervals: self
                .intervals
                .iter()
                .map(|&(a, b)| (a + c, b + c))
                .collect(),
            points: self.points.iter().map(|&p| p + c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((*state >> 11) as f64) / (1u64 << 53) as f64
    }

    fn random_set(state: &mut u64) -> SpectralSet {
        let n_iv = (lcg(state) * 3.0) as usize;
        let n_pt = 1 + (lcg(state) * 3.0) as usize;
        let mut iv = Vec::new();
        for _ in 0..n_iv {
            let a = lcg(state) * 10.0 - 5.0;
            let b = a + lcg(state) * 3.0;
            iv.push((a, b));
        }
        let pts = (0..n_pt).map(|_| lcg(state) * 10.0 - 5.0).collect();
        SpectralSet::from_parts(iv, pts)
    }

    #[test]
    fn from_samples_basic() {
        let s = SpectralSet::from_samples(&[1.0, 1.01, 1.02, 5.0], 0.1);
        assert_eq!(s.intervals(), &[(1.0, 1.02)]);
        assert_eq!(s.points(), &[5.0]);

        assert!(SpectralSet::from_samples(&[], 0.1).is_empty());

        let s = SpectralSet::from_samples(&[0.0, 0.5, 1.0], 0.6);
        assert_eq!(s.intervals(), &[(0.0, 1.0)]);
        assert!(s.points().is_empty());
    }

    #[test]
    fn union_touching_and_idempotent() {
        let a = SpectralSet::interval(0.0, 1.0);
        let b = SpectralSet::interval(1.0, 2.0);
        assert_eq!(a.union(&b), SpectralSet::interval(0.0, 2.0));

        let band = SpectralSet::interval(-2.0, 2.0);
        let two = band.union(&SpectralSet::point(-(13.0f64).sqrt()));
        assert_eq!(two.intervals().len(), 1);
        assert_eq!(two.points().len(), 1);
        assert_eq!(two.union(&two), two);
    }

    #[test]
    fn canonicalization_is_idempotent_and_union_commutes() {
        let mut st = 42u64;
        for _ in 0..200 {
            let a = random_set(&mut st);
            let b = random_set(&mut st);
            let c = random_set(&mut st);
            let re = SpectralSet::from_parts(a.intervals().to_vec(), a.points().to_vec());
            assert_eq!(re, a);
            assert_eq!(a.union(&b), b.union(&a));
            assert_eq!(a.union(&b).union(&c), a.union(&b.union(&c)));
        }
    }

    #[test]
    fn minkowski_examples() {
        let band = SpectralSet::interval(-2.0, 2.0);
        assert_eq!(
            band.minkowski_sum(&band).unwrap(),
            SpectralSet::interval(-4.0, 4.0)
        );

        let p = SpectralSet::point(-(13.0f64).sqrt());
        let shifted = p.minkowski_sum(&band).unwrap();
        assert_eq!(
            shifted,
            SpectralSet::interval(-(13.0f64).sqrt() - 2.0, -(13.0f64).sqrt() + 2.0)
        );

        let s = band.union(&SpectralSet::point(5.0));
        assert_eq!(s.minkowski_sum(&SpectralSet::point(0.0)).unwrap(), s);

        assert_eq!(
            SpectralSet::empty().minkowski_sum(&band),
            Err(SetError::EmptyOperand)
        );
    }

    #[test]
    fn minkowski_commutative_associative() {
        let mut st = 7u64;
        for _ in 0..100 {
            let a = random_set(&mut st);
            let b = random_set(&mut st);
            assert_eq!(a.minkowski_sum(&b).unwrap(), b.minkowski_sum(&a).unwrap());
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = SpectralSet::interval(0.0, 1.0);
        let b = a.union(&SpectralSet::point(2.0));
        assert_eq!(a.hausdorff(&b).unwrap(), 1.0);
        assert_eq!(a.hausdorff(&a).unwrap(), 0.0);

        let c = SpectralSet::interval(0.0, 3.0);
        assert_eq!(a.one_sided_hausdorff(&c).unwrap(), 0.0);
        assert_eq!(c.one_sided_hausdorff(&a).unwrap(), 2.0);
    }

    #[test]
    fn hausdorff_interior_gap_probe() {
        // sup_{x in [0,10]} dist(x, {0} u {10}) is attained at x = 5
        let long = SpectralSet::interval(0.0, 10.0);
        let ends = SpectralSet::from_parts(vec![], vec![0.0, 10.0]);
        assert_eq!(long.one_sided_hausdorff(&ends).unwrap(), 5.0);
    }

    #[test]
    fn hausdorff_metric_axioms() {
        let mut st = 11u64;
        for _ in 0..200 {
            let a = random_set(&mut st);
            let b = random_set(&mut st);
            let c = random_set(&mut st);
            let dab = a.hausdorff(&b).unwrap();
            let dba = b.hausdorff(&a).unwrap();
            assert_eq!(dab, dba);
            assert!(dab >= 0.0);
            if a == b {
                assert_eq!(dab, 0.0);
            }
            let dac = a.hausdorff(&c).unwrap();
            let dcb = c.hausdorff(&b).unwrap();
            assert!(dab <= dac + dcb + 1e-12, "triangle: {dab} > {dac} + {dcb}");
        }
    }

    #[test]
    fn closure_union_absorbs_endpoint_limits() {
        let a = SpectralSet::interval(0.0, 1.0);
        let p = SpectralSet::point(1.0 + 0.5e-12);
        let u = SpectralSet::closure_union(&[a, p]);
        assert_eq!(u.points().len(), 0);
        assert_eq!(u.intervals().len(), 1);
        assert!(u.intervals()[0].1 >= 1.0);
    }

    #[test]
    fn subset_checks() {
        let band = SpectralSet::interval(-2.0, 2.0);
        let sub = SpectralSet::interval(-1.0, 1.0).union(&SpectralSet::point(2.0));
        assert!(sub.is_subset_of(&band));
        assert!(!band.is_subset_of(&sub));
    }

    #[test]
    fn json_round_trip_exact() {
        let s = SpectralSet::interval(-2.0, 2.0).union(&SpectralSet::point(13.0f64.sqrt()));
        let text = serde_json::to_string(&s).unwrap();
        let back: SpectralSet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
