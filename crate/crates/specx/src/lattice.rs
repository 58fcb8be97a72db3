//! Points of the integer lattice Z^d, d ∈ {1, 2}.

use std::fmt;
use std::ops::{Add, Neg, Sub};

/// A point of Z^d. Dimension is carried per value; mixing dimensions in
/// arithmetic is a programming error and panics.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LatticePoint {
    dim: u8,
    c: [i64; 2],
}

impl LatticePoint {
    pub fn one(x: i64) -> Self {
        LatticePoint { dim: 1, c: [x, 0] }
    }

    pub fn two(x: i64, y: i64) -> Self {
        LatticePoint { dim: 2, c: [x, y] }
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only d=1 and d=2 are supported");
        LatticePoint {
            dim: dim as u8,
            c: [0, 0],
        }
    }

    /// Unit vector along `axis` with the given sign.
    pub fn axis_unit(dim: usize, axis: usize, sign: i8) -> Self {
        let mut p = Self::zero(dim);
        assert!(axis < dim);
        p.c[axis] = sign as i64;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn get(&self, axis: usize) -> i64 {
        assert!(axis < self.dim());
        self.c[axis]
    }

    pub fn coords(&self) -> &[i64] {
        &self.c[..self.dim()]
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&x| x == 0)
    }

    pub fn norm_inf(&self) -> i64 {
        self.coords().iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn norm2(&self) -> f64 {
        self.coords()
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, k: i64) -> Self {
        let mut p = *self;
        for i in 0..p.dim() {
            p.c[i] *= k;
        }
        p
    }

    fn check_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "lattice dimension mismatch");
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        self.check_dim(&rhs);
        let mut p = self;
        for i in 0..p.dim() {
            p.c[i] += rhs.c[i];
        }
        p
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        self.check_dim(&rhs);
        let mut p = self;
        for i in 0..p.dim() {
            p.c[i] -= rhs.c[i];
        }
        p
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        let mut p = self;
        for i in 0..p.dim() {
            p.c[i] = -p.c[i];
        }
        p
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim() == 1 {
            write!(f, "{}", self.c[0])
        } else {
            write!(f, "({}, {})", self.c[0], self.c[1])
        }
    }
}

/// An axis-aligned box `[lo, hi]` (inclusive) of lattice points.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BoxRegion {
    pub lo: LatticePoint,
    pub hi: LatticePoint,
}

impl BoxRegion {
    pub fn new(lo: LatticePoint, hi: LatticePoint) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        for axis in 0..lo.dim() {
            assert!(lo.get(axis) <= hi.get(axis), "empty box");
        }
        BoxRegion { lo, hi }
    }

    /// Symmetric-ish box of `n` sites per axis centered at the origin.
    pub fn centered(dim: usize, n: usize) -> Self {
        assert!(n >= 1);
        let lo = -((n as i64) / 2);
        let hi = lo + n as i64 - 1;
        match dim {
            1 => BoxRegion::new(LatticePoint::one(lo), LatticePoint::one(hi)),
            2 => BoxRegion::new(LatticePoint::two(lo, lo), LatticePoint::two(hi, hi)),
            _ => panic!("only d=1 and d=2 are supported"),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi.get(axis) - self.lo.get(axis) + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|a| self.side(a)).product()
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        (0..self.dim()).all(|a| self.lo.get(a) <= p.get(a) && p.get(a) <= self.hi.get(a))
    }

    /// Row-major linear index of an in-box point.
    pub fn index_of(&self, p: LatticePoint) -> usize {
        debug_assert!(self.contains(p));
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.side(a) + (p.get(a) - self.lo.get(a)) as usize;
        }
        idx
    }

    pub fn point_at(&self, mut idx: usize) -> LatticePoint {
        let mut coords = [0i64; 2];
        for a in (0..self.dim()).rev() {
            let s = self.side(a);
            coords[a] = self.lo.get(a) + (idx % s) as i64;
            idx /= s;
        }
        match self.dim() {
            1 => LatticePoint::one(coords[0]),
            _ => LatticePoint::two(coords[0], coords[1]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.volume()).map(move |i| self.point_at(i))
    }

    /// Shrinks the box by `margin` sites on every side.
    pub fn shrunk(&self, margin: i64) -> BoxRegion {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for a in 0..self.dim() {
            lo.c[a] += margin;
            hi.c[a] -= margin;
        }
        BoxRegion::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_indexing_round_trips() {
        let b = BoxRegion::new(LatticePoint::two(-2, 1), LatticePoint::two(1, 3));
        assert_eq!(b.volume(), 12);
        for i in 0..b.volume() {
            let p = b.point_at(i);
            assert!(b.contains(p));
            assert_eq!(b.index_of(p), i);
        }
    }

    #[test]
    fn centered_box_covers_origin() {
        for n in [1usize, 2, 5, 100] {
            let b = BoxRegion::centered(1, n);
            assert_eq!(b.volume(), n);
            assert!(b.contains(LatticePoint::zero(1)));
        }
    }
}
