//! Exact finite-model diagnostics on cyclic groups Z_M: the shift /
//! modulation pair and its commutation relation, the averaging map over
//! characters (an exact finite sum), the twisted Fourier transform with
//! its inversion formula, and the crossed-product membership and
//! compactness profiles evaluated through operator norms.

use crate::eig_kernel::operator_norm;
use crate::mat::DenseMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// A dense complex operator on l^2(Z_M).
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicGroupOperator {
    m: usize,
    a: Vec<Complex64>,
}

impl CyclicGroupOperator {
    pub fn zeros(m: usize) -> Self {
        CyclicGroupOperator {
            m,
            a: vec![Complex64::ZERO; m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        let mut t = Self::zeros(m);
        for i in 0..m {
            t.set(i, i, Complex64::ONE);
        }
        t
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut t = Self::zeros(m);
        for i in 0..m {
            for j in 0..m {
                t.set(i, j, f(i, j));
            }
        }
        t
    }

    /// Translation U_x: (U_x f)(y) = f(y + x).
    pub fn shift(m: usize, x: i64) -> Self {
        Self::from_fn(m, |i, j| {
            if (i as i64 + x).rem_euclid(m as i64) as usize == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Modulation V_k: multiplication by the character y -> e^{2 pi i k y / M}.
    pub fn modulation(m: usize, k: i64) -> Self {
        let mut t = Self::zeros(m);
        for y in 0..m {
            t.set(y, y, character(m, k, y as i64));
        }
        t
    }

    /// Multiplication operator phi(Q).
    pub fn position_multiplier(m: usize, phi: &[f64]) -> Self {
        assert_eq!(phi.len(), m);
        let mut t = Self::zeros(m);
        for y in 0..m {
            t.set(y, y, Complex64::new(phi[y], 0.0));
        }
        t
    }

    /// Momentum multiplier psi(P) = F* diag(psi) F, entries
    /// (1/M) sum_k psi(k) e^{2 pi i k (x - y) / M}.
    pub fn momentum_multiplier(m: usize, psi: &[f64]) -> Self {
        assert_eq!(psi.len(), m);
        Self::from_fn(m, |x, y| {
            let mut s = Complex64::ZERO;
            for (k, &p) in psi.iter().enumerate() {
                s += p * character(m, k as i64, x as i64 - y as i64);
            }
            s / m as f64
        })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.m + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        let m = self.m;
        let mut out = Self::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let aik = self.get(i, k);
                if aik == Complex64::ZERO {
                    continue;
                }
                for j in 0..m {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.m, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        Self::from_fn(self.m, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        Self::from_fn(self.m, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_fn(self.m, |i, j| c * self.get(i, j))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.m {
            for j in 0..self.m {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real symmetric-style 2M x 2M embedding [[Re, -Im], [Im, Re]]; the
    /// embedding is an isometry for the spectral norm.
    pub fn real_embedding(&self) -> DenseMatrix {
        let m = self.m;
        DenseMatrix::from_fn(2 * m, 2 * m, |i, j| {
            let (bi, ii) = (i / m, i % m);
            let (bj, jj) = (j / m, j % m);
            let v = self.get(ii, jj);
            match (bi, bj) {
                (0, 0) | (1, 1) => v.re,
                (0, 1) => -v.im,
                _ => v.im,
            }
        })
    }

    /// Spectral norm via the real embedding.
    pub fn norm(&self) -> f64 {
        operator_norm(&self.real_embedding()).expect("norm iteration converged")
    }

    pub fn diagonal_part(&self) -> Self {
        let mut t = Self::zeros(self.m);
        for i in 0..self.m {
            t.set(i, i, self.get(i, i));
        }
        t
    }
}

/// The character value k(x) = e^{2 pi i k x / M}.
pub fn character(m: usize, k: i64, x: i64) -> Complex64 {
    let phase =
        TAU * ((k.rem_euclid(m as i64) * x.rem_euclid(m as i64)) % m as i64) as f64 / m as f64;
    Complex64::new(phase.cos(), phase.sin())
}

/// A shift/modulation pair with its commutation data.
#[derive(Clone, Copy, Debug)]
pub struct WeylPair {
    pub m: usize,
    pub x: i64,
    pub k: i64,
}

impl WeylPair {
    pub fn shift(&self) -> CyclicGroupOperator {
        CyclicGroupOperator::shift(self.m, self.x)
    }

    pub fn modulation(&self) -> CyclicGroupOperator {
        CyclicGroupOperator::modulation(self.m, self.k)
    }

    /// Frobenius norm of U_x V_k - k(x) V_k U_x.
    pub fn commutation_residual(&self) -> f64 {
        let u = self.shift();
        let v = self.modulation();
        let lhs = u.mul(&v);
        let rhs = v.mul(&u).scale(character(self.m, self.k, self.x));
        lhs.sub(&rhs).frobenius()
    }
}

/// Worst commutation residual over the whole group.
pub fn weyl_residual(m: usize) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..m as i64 {
        let u = CyclicGroupOperator::shift(m, x);
        for k in 0..m as i64 {
            let v = CyclicGroupOperator::modulation(m, k);
            let lhs = u.mul(&v);
            let rhs = v.mul(&u).scale(character(m, k, x));
            worst = worst.max(lhs.sub(&rhs).frobenius());
        }
    }
    worst
}

/// The averaging map over characters: (1/M) sum_k V_k^* T V_k, computed
/// as the literal finite sum. Exactly the diagonal part of T.
pub fn average_over_characters(t: &CyclicGroupOperator) -> CyclicGroupOperator {
    let m = t.order();
    let mut acc = CyclicGroupOperator::zeros(m);
    for k in 0..m as i64 {
        let v = CyclicGroupOperator::modulation(m, k);
        let term = v.adjoint().mul(t).mul(&v);
        acc = acc.add(&term);
    }
    acc.scale(Complex64::new(1.0 / m as f64, 0.0))
}

/// The twisted Fourier coefficient at x: the averaging map applied to
/// T U_x^*, a multiplication operator whose diagonal is the x-th cyclic
/// off-diagonal of T.
pub fn twisted_fourier(t: &CyclicGroupOperator, x: i64) -> CyclicGroupOperator {
    let u = CyclicGroupOperator::shift(t.order(), x);
    average_over_characters(&t.mul(&u.adjoint()))
}

/// Reconstruction sum_x Tf(x) U_x of the twisted Fourier coefficients.
pub fn fourier_inversion(t: &CyclicGroupOperator) -> CyclicGroupOperator {
    let m = t.order();
    let mut acc = CyclicGroupOperator::zeros(m);
    for x in 0..m as i64 {
        let coeff = twisted_fourier(t, x);
        let u = CyclicGroupOperator::shift(m, x);
        acc = acc.add(&coeff.mul(&u));
    }
    acc
}

/// Both crossed-product membership profiles over all group elements:
/// k -> ||[T, V_k]|| and x -> ||(U_x - 1) T||.
pub fn landstad_profile(t: &CyclicGroupOperator) -> (Vec<f64>, Vec<f64>) {
    let m = t.order();
    let one = CyclicGroupOperator::identity(m);
    let commutators = (0..m as i64)
        .map(|k| {
            let v = CyclicGroupOperator::modulation(m, k);
            t.mul(&v).sub(&v.mul(t)).norm()
        })
        .collect();
    let shifts = (0..m as i64)
        .map(|x| {
            let u = CyclicGroupOperator::shift(m, x);
            u.sub(&one).mul(t).norm()
        })
        .collect();
    (commutators, shifts)
}

/// Components of the finite-model compactness criterion: position and
/// momentum tails over the co-small set d(., 0) > M/4, and the smallest-
/// argument shift and modulation profile values scaled to [0, ||T||].
#[derive(Clone, Copy, Debug)]
pub struct CompactnessDefect {
    /// ||(U_1 - 1) T|| / 2
    pub shift_term: f64,
    /// ||(V_1 - 1) T|| / 2
    pub modulation_term: f64,
    /// ||1_F(Q) T|| for F = {d(x, 0) > M/4}
    pub position_tail: f64,
    /// ||1_F(P) T|| for the dual tail
    pub momentum_tail: f64,
    pub defect: f64,
}

fn cyclic_distance(m: usize, x: usize) -> usize {
    x.min(m - x)
}

/// Scalar measure of joint position/momentum concentration: near zero for
/// compact-like operators, bounded below for shifts (whose position tail
/// is exactly 1).
pub fn compactness_defect(t: &CyclicGroupOperator) -> CompactnessDefect {
    let m = t.order();
    assert!(m >= 8, "the defect needs a group of order at least 8");
    let one = CyclicGroupOperator::identity(m);
    let u1 = CyclicGroupOperator::shift(m, 1);
    let v1 = CyclicGroupOperator::modulation(m, 1);
    let shift_term = u1.sub(&one).mul(t).norm() / 2.0;
    let modulation_term = v1.sub(&one).mul(t).norm() / 2.0;

    let indicator: Vec<f64> = (0..m)
        .map(|x| {
            if cyclic_distance(m, x) > m / 4 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let position_tail = CyclicGroupOperator::position_multiplier(m, &indicator)
        .mul(t)
        .norm();
    let momentum_tail = CyclicGroupOperator::momentum_multiplier(m, &indicator)
        .mul(t)
        .norm();
    let defect = shift_term
        .max(modulation_term)
        .max(position_tail)
        .max(momentum_tail);
    CompactnessDefect {
        shift_term,
        modulation_term,
        position_tail,
        momentum_tail,
        defect,
    }
}

/// A discrete Gaussian bump on the dual group, width sigma.
pub fn dual_gaussian(m: usize, sigma: f64) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let d = cyclic_distance(m, k) as f64;
            (-(d * d) / (sigma * sigma)).exp()
        })
        .collect()
}

/// A normalized Gaussian vector on the group, balanced for the
/// position/momentum uncertainty at order M.
pub fn balanced_gaussian_vector(m: usize) -> Vec<f64> {
    let s = (m as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    let mut v: Vec<f64> = (0..m)
        .map(|x| {
            let d = cyclic_distance(m, x) as f64;
            (-(d * d) / (4.0 * s * s)).exp()
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    v
}

/// Rank-1 projector onto a unit vector.
pub fn rank_one_projector(g: &[f64]) -> CyclicGroupOperator {
    let m = g.len();
    CyclicGroupOperator::from_fn(m, |i, j| Complex64::new(g[i] * g[j], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_operator(m: usize, seed: u64) -> CyclicGroupOperator {
        let mut state = seed;
        let mut rnd = move || {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        CyclicGroupOperator::from_fn(m, |_, _| Complex64::new(rnd(), rnd()))
    }

    #[test]
    fn weyl_relation_exact() {
        assert!(weyl_residual(16) <= 1e-13);
        assert!(weyl_residual(64) <= 1e-13);
        let pair = WeylPair { m: 64, x: 5, k: 11 };
        assert!(pair.commutation_residual() <= 1e-13);
    }

    #[test]
    fn averaging_is_diagonal_extraction() {
        // shift has zero diagonal
        let u = CyclicGroupOperator::shift(8, 1);
        let avg = average_over_characters(&u);
        assert!(avg.max_abs() < 1e-14);

        // diagonal operators are fixed points
        let d = CyclicGroupOperator::position_multiplier(
            8,
            &[1.0, -2.0, 3.0, 0.5, 0.0, 1.5, -1.0, 2.0],
        );
        let avg = average_over_characters(&d);
        assert!(avg.sub(&d).max_abs() < 1e-14);

        // random operators: character sum against direct extraction
        let t = random_operator(16, 7);
        let avg = average_over_characters(&t);
        assert!(avg.sub(&t.diagonal_part()).max_abs() <= 1e-13);
    }

    #[test]
    fn averaging_linear_positive_contractive() {
        let m = 16;
        let s = random_operator(m, 1);
        let t = random_operator(m, 2);
        let lin = average_over_characters(&s.add(&t))
            .sub(&average_over_characters(&s).add(&average_over_characters(&t)));
        assert!(lin.max_abs() < 1e-13);

        // positivity: the average of T*T has nonnegative diagonal
        let pos = average_over_characters(&t.adjoint().mul(&t));
        for i in 0..m {
            let v = pos.get(i, i);
            assert!(v.im.abs() < 1e-13);
            assert!(v.re >= -1e-13);
        }

        // idempotent on diagonals
        let d = t.diagonal_part();
        assert!(average_over_characters(&d).sub(&d).max_abs() < 1e-14);

        // contractive on samples
        for seed in 3..8 {
            let t = random_operator(m, seed);
            assert!(average_over_characters(&t).norm() <= t.norm() + 1e-12);
        }
    }

    #[test]
    fn twisted_fourier_extracts_off_diagonals() {
        let m = 16;
        // T = phi(Q) U_a concentrates at x = a
        let phi: Vec<f64> = (0..m).map(|i| (i as f64 * 0.3).cos()).collect();
        let a = 5i64;
        let t = CyclicGroupOperator::position_multiplier(m, &phi)
            .mul(&CyclicGroupOperator::shift(m, a));
        for x in 0..m as i64 {
            let coeff = twisted_fourier(&t, x);
            if x == a {
                let expect = CyclicGroupOperator::position_multiplier(m, &phi);
                assert!(coeff.sub(&expect).max_abs() < 1e-13);
            } else {
                assert!(coeff.max_abs() < 1e-13, "x = {x}");
            }
        }

        // identity: single coefficient at x = 0
        let id = CyclicGroupOperator::identity(m);
        assert!(twisted_fourier(&id, 0).sub(&id).max_abs() < 1e-14);
        assert!(twisted_fourier(&id, 3).max_abs() < 1e-14);

        // random: diagonal of Tf(x) equals the x-th cyclic off-diagonal
        let t = random_operator(m, 11);
        for x in 0..m as i64 {
            let coeff = twisted_fourier(&t, x);
            for y in 0..m {
                let expect = t.get(y, (y + x as usize) % m);
                assert!((coeff.get(y, y) - expect).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn fourier_inversion_reconstructs() {
        for m in [4usize, 8, 16] {
            let t = random_operator(m, m as u64);
            let r = fourier_inversion(&t);
            assert!(r.sub(&t).max_abs() <= 1e-12, "M = {m}");
        }
        // hermitian case
        let t = random_operator(16, 5);
        let h = t.add(&t.adjoint()).scale(Complex64::new(0.5, 0.0));
        assert!(fourier_inversion(&h).sub(&h).max_abs() < 1e-12);

        // U_3: single term at x = 3 with unit coefficient
        let u3 = CyclicGroupOperator::shift(16, 3);
        let c3 = twisted_fourier(&u3, 3);
        assert!(c3.sub(&CyclicGroupOperator::identity(16)).max_abs() < 1e-13);
        assert!(fourier_inversion(&u3).sub(&u3).max_abs() < 1e-12);
    }

    #[test]
    fn landstad_profiles() {
        let m = 16;
        // diagonal operators commute with every modulation
        let d = CyclicGroupOperator::position_multiplier(
            m,
            &(0..m).map(|i| (i as f64).sin()).collect::<Vec<_>>(),
        );
        let (comm, _) = landstad_profile(&d);
        for c in comm {
            assert!(c < 1e-12);
        }

        // T = U_1: ||[U_1, V_k]|| = |k(1) - 1|
        let u1 = CyclicGroupOperator::shift(m, 1);
        let (comm, _) = landstad_profile(&u1);
        for (k, c) in comm.iter().enumerate() {
            let expect = (character(m, k as i64, 1) - Complex64::ONE).norm();
            assert!((c - expect).abs() < 1e-9, "k = {k}: {c} vs {expect}");
        }
    }

    #[test]
    fn commutator_bound_for_smooth_symbols() {
        let m = 32;
        let phi: Vec<f64> = (0..m)
            .map(|x| 1.0 / (1.0 + (cyclic_distance(m, x) as f64 / 4.0).powi(2)))
            .collect();
        let psi = dual_gaussian(m, m as f64 / 8.0);
        let t = CyclicGroupOperator::position_multiplier(m, &phi)
            .mul(&CyclicGroupOperator::momentum_multiplier(m, &psi));
        let (comm, _) = landstad_profile(&t);
        let phi_sup = phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for (k, c) in comm.iter().enumerate() {
            let max_diff = (0..m)
                .map(|p| (psi[(p + k) % m] - psi[p]).abs())
                .fold(0.0f64, f64::max);
            assert!(*c <= phi_sup * max_diff + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn compactness_defect_extremes() {
        let m = 64;
        // localized rank-1 projector: small defect
        let g = balanced_gaussian_vector(m);
        let p = rank_one_projector(&g);
        let d = compactness_defect(&p);
        assert!(d.defect < 0.2, "defect {}", d.defect);
        assert!(d.position_tail < 1e-6);
        assert!(d.momentum_tail < 1e-6);

        // the shift: position tail is exactly 1
        let u = CyclicGroupOperator::shift(m, 1);
        let d = compactness_defect(&u);
        assert!((d.position_tail - 1.0).abs() < 1e-9);
        assert!((d.defect - 1.0).abs() < 1e-9);

        // zero operator: zero defect
        let z = CyclicGroupOperator::zeros(m);
        assert_eq!(compactness_defect(&z).defect, 0.0);
    }
}
