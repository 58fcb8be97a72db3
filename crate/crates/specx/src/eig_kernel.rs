//! Self-contained double-precision symmetric eigensolvers and norm
//! estimators: Sturm-sequence bisection for tridiagonal matrices (all
//! eigenvalues, plus a clustered "cloud" mode for very large truncations),
//! inverse iteration for selected eigenvectors, Householder reduction with
//! implicit-shift QL for dense matrices, and a power-iteration spectral
//! norm. Complex Hermitian matrices are handled through the standard
//! 2n x 2n real symmetric embedding.

use crate::mat::DenseMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EigError {
    #[error("off-diagonal length must be diagonal length - 1")]
    DimensionMismatch,
    #[error("matrix is not symmetric")]
    NonSymmetricInput,
    #[error("no convergence in {0}")]
    NoConvergence(&'static str),
}

/// QL iteration cap per eigenvalue.
const QL_MAX_ITER: usize = 50;

#[derive(Clone, Debug)]
pub struct SymmetricEigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal, `eigenvectors[j]` pairs with `eigenvalues[j]`.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

/// Upper bound on the spectral norm of a symmetric tridiagonal matrix.
pub fn gershgorin_bound(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let mut b = 0.0f64;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        b = b.max(diag[i].abs() + left + right);
    }
    b
}

fn gershgorin_interval(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (lo, hi)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly
/// below `x`, by counting negative pivots of the LDL^T factorization.
pub fn sturm_count(diag: &[f64], off2: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let mut count = 0usize;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < 1e-300 {
            if q >= 0.0 {
                1e-300
            } else {
                -1e-300
            }
        } else {
            q
        };
        q = (diag[i] - x) - off2[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Batched Sturm counts. Shifts are processed eight at a time so the
/// per-element divisions pipeline across independent recurrences; this is
/// what makes the 10^5-site truncation oracles affordable.
pub fn sturm_counts(diag: &[f64], off2: &[f64], xs: &[f64]) -> Vec<usize> {
    let n = diag.len();
    let mut out = Vec::with_capacity(xs.len());
    if n == 0 {
        out.resize(xs.len(), 0);
        return out;
    }
    let mut chunks = xs.chunks_exact(8);
    for chunk in &mut chunks {
        let mut shift = [0.0f64; 8];
        shift.copy_from_slice(chunk);
        let mut q = [0.0f64; 8];
        let mut cnt = [0usize; 8];
        for l in 0..8 {
            q[l] = diag[0] - shift[l];
            cnt[l] = (q[l] < 0.0) as usize;
        }
        for i in 1..n {
            let di = diag[i];
            let e2 = off2[i - 1];
            for l in 0..8 {
                let mut qq = q[l];
                if qq.abs() < 1e-300 {
                    qq = if qq >= 0.0 { 1e-300 } else { -1e-300 };
                }
                let v = (di - shift[l]) - e2 / qq;
                q[l] = v;
                cnt[l] += (v < 0.0) as usize;
            }
        }
        out.extend_from_slice(&cnt);
    }
    for &x in chunks.remainder() {
        out.push(sturm_count(diag, off2, x));
    }
    out
}

/// A resolved bracket `[lo, hi]` known to contain exactly `count`
/// eigenvalues (multiplicity included).
#[derive(Clone, Copy, Debug)]
pub struct EigCell {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl EigCell {
    pub fn value(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Locates all eigenvalues by recursive bisection on Sturm counts.
///
/// Brackets holding at most `isolate_cap` eigenvalues are refined until
/// their width drops below `fine`; wider clusters stop at `coarse`. With
/// `coarse == fine` every eigenvalue is resolved to `fine`.
pub fn eigenvalue_cells(
    diag: &[f64],
    off: &[f64],
    coarse: f64,
    fine: f64,
    isolate_cap: usize,
) -> Vec<EigCell> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![EigCell {
            lo: diag[0],
            hi: diag[0],
            count: 1,
        }];
    }
    let off2: Vec<f64> = off.iter().map(|e| e * e).collect();
    let (glo, ghi) = gershgorin_interval(diag, off);
    let pad = 1e-8 * (ghi - glo).abs().max(1.0);
    let (glo, ghi) = (glo - pad, ghi + pad);

    let mut cells: Vec<EigCell> = Vec::new();
    let mut active: Vec<(f64, f64, usize, usize)> = vec![(glo, ghi, 0, n)];

    let settle = |lo: f64,
                  hi: f64,
                  clo: usize,
                  chi: usize,
                  next: &mut Vec<(f64, f64, usize, usize)>,
                  cells: &mut Vec<EigCell>| {
        let k = chi - clo;
        if k == 0 {
            return;
        }
        let w = hi - lo;
        let mid = 0.5 * (lo + hi);
        let degenerate = !(mid > lo && mid < hi);
        if w <= fine || degenerate || (w <= coarse && k > isolate_cap) {
            cells.push(EigCell { lo, hi, count: k });
        } else {
            next.push((lo, hi, clo, chi));
        }
    };

    // seed: the root interval may already satisfy a stop rule
    {
        let mut next = Vec::new();
        let mut first = Vec::new();
        settle(glo, ghi, 0, n, &mut next, &mut first);
        cells.extend(first);
        active = if cells.is_empty() { active } else { next };
        if !cells.is_empty() && active.is_empty() {
            cells.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
            return cells;
        }
    }

    while !active.is_empty() {
        let mids: Vec<f64> = active
            .iter()
            .map(|&(lo, hi, _, _)| 0.5 * (lo + hi))
            .collect();
        let counts = sturm_counts(diag, &off2, &mids);
        let mut next = Vec::new();
        for (idx, &(lo, hi, clo, chi)) in active.iter().enumerate() {
            let mid = mids[idx];
            let cm = counts[idx].clamp(clo, chi);
            settle(lo, mid, clo, cm, &mut next, &mut cells);
            settle(mid, hi, cm, chi, &mut next, &mut cells);
        }
        active = next;
    }
    cells.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    cells
}

/// Expands cells into a sorted sample list, one entry per eigenvalue.
pub fn cells_to_samples(cells: &[EigCell]) -> Vec<f64> {
    let mut v = Vec::with_capacity(cells.iter().map(|c| c.count).sum());
    for c in cells {
        for _ in 0..c.count {
            v.push(c.value());
        }
    }
    v
}

fn split_blocks(diag: &[f64], off: &[f64]) -> Vec<(usize, usize)> {
    let n = diag.len();
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n.saturating_sub(1) {
        if off[i].abs() <= f64::EPSILON * (diag[i].abs() + diag[i + 1].abs()) {
            blocks.push((start, i + 1));
            start = i + 1;
        }
    }
    blocks.push((start, n));
    blocks
}

/// All eigenvalues (and optionally eigenvectors) of a symmetric
/// tridiagonal matrix. Eigenvalues by Sturm bisection to an absolute
/// accuracy of `1e-11 * max(1, ||M||)`; eigenvectors by inverse iteration
/// with in-cluster orthogonalization.
pub fn tridiag_eigen(
    diag: &[f64],
    off: &[f64],
    want_vectors: bool,
) -> Result<SymmetricEigenResult, EigError> {
    let n = diag.len();
    if n == 0 {
        return Ok(SymmetricEigenResult {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(Vec::new),
        });
    }
    if off.len() + 1 != n {
        return Err(EigError::DimensionMismatch);
    }
    let scale = gershgorin_bound(diag, off).max(1.0);
    let fine = 1e-11 * scale;

    let mut pairs: Vec<(f64, Option<Vec<f64>>)> = Vec::with_capacity(n);
    for (b0, b1) in split_blocks(diag, off) {
        let d = &diag[b0..b1];
        let e = &off[b0..b1.saturating_sub(1).max(b0)];
        let e = if b1 - b0 > 1 {
            &off[b0..b1 - 1]
        } else {
            &e[..0]
        };
        let cells = eigenvalue_cells(d, e, fine, fine, usize::MAX);
        let values = cells_to_samples(&cells);
        if !want_vectors {
            for v in values {
                pairs.push((v, None));
            }
            continue;
        }
        // vectors: inverse iteration, orthogonalizing inside clusters
        let cluster_gap = (1e3 * f64::EPSILON * scale).max(2.0 * fine);
        let mut i = 0;
        while i < values.len() {
            let mut j = i + 1;
            while j < values.len() && values[j] - values[j - 1] <= cluster_gap {
                j += 1;
            }
            let mut cluster_vecs: Vec<Vec<f64>> = Vec::new();
            for (idx, &lambda) in values[i..j].iter().enumerate() {
                let prev: Vec<&[f64]> = cluster_vecs.iter().map(|v| v.as_slice()).collect();
                let v = tridiag_inverse_iteration(d, e, lambda, &prev, (b0 + i + idx) as u64);
                cluster_vecs.push(v);
            }
            for (k, &lambda) in values[i..j].iter().enumerate() {
                let mut full = vec![0.0; n];
                full[b0..b1].copy_from_slice(&cluster_vecs[k]);
                pairs.push((lambda, Some(full)));
            }
            i = j;
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = if want_vectors {
        Some(pairs.into_iter().map(|p| p.1.unwrap()).collect())
    } else {
        None
    };
    Ok(SymmetricEigenResult {
        eigenvalues,
        eigenvectors,
    })
}

fn tiny_lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    }
}

struct TridiagLu {
    du0: Vec<f64>,
    du1: Vec<f64>,
    du2: Vec<f64>,
    ml: Vec<f64>,
    piv: Vec<bool>,
}

/// LU factorization of `T - lambda I` with partial pivoting.
fn tridiag_lu(diag: &[f64], off: &[f64], lambda: f64) -> TridiagLu {
    let n = diag.len();
    let mut du0 = vec![0.0; n];
    let mut du1 = vec![0.0; n.saturating_sub(1)];
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut ml = vec![0.0; n.saturating_sub(1)];
    let mut piv = vec![false; n.saturating_sub(1)];

    let tiny = 1e-300;
    let mut cur_d = diag[0] - lambda;
    let mut cur_s = if n > 1 { off[0] } else { 0.0 };
    for i in 0..n - 1 {
        let sub = off[i];
        let next_d = diag[i + 1] - lambda;
        let next_s = if i + 2 < n { off[i + 1] } else { 0.0 };
        if cur_d.abs() >= sub.abs() {
            let denom = if cur_d.abs() < tiny {
                tiny.copysign(cur_d)
            } else {
                cur_d
            };
            let m = sub / denom;
            du0[i] = cur_d;
            du1[i] = cur_s;
            if i + 2 < n {
                du2[i] = 0.0;
            }
            ml[i] = m;
            cur_d = next_d - m * cur_s;
            cur_s = next_s;
        } else {
            // swap rows i and i+1
            piv[i] = true;
            let m = cur_d / sub;
            du0[i] = sub;
            du1[i] = next_d;
            if i + 2 < n {
                du2[i] = next_s;
            }
            ml[i] = m;
            cur_d = cur_s - m * next_d;
            cur_s = -m * next_s;
        }
    }
    du0[n - 1] = if cur_d.abs() < tiny {
        tiny.copysign(cur_d)
    } else {
        cur_d
    };
    TridiagLu {
        du0,
        du1,
        du2,
        ml,
        piv,
    }
}

fn tridiag_lu_solve(lu: &TridiagLu, y: &mut [f64]) {
    let n = y.len();
    for i in 0..n - 1 {
        if lu.piv[i] {
            y.swap(i, i + 1);
        }
        y[i + 1] -= lu.ml[i] * y[i];
    }
    let tiny = 1e-300;
    for i in (0..n).rev() {
        let mut s = y[i];
        if i + 1 < n {
            s -= lu.du1[i] * y[i + 1];
        }
        if i + 2 < n {
            s -= lu.du2[i] * y[i + 2];
        }
        let d = if lu.du0[i].abs() < tiny {
            tiny.copysign(lu.du0[i])
        } else {
            lu.du0[i]
        };
        y[i] = s / d;
    }
}

fn tridiag_matvec(diag: &[f64], off: &[f64], x: &[f64], y: &mut [f64]) {
    let n = diag.len();
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        y[i] = s;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// One eigenvector of a symmetric tridiagonal matrix by inverse
/// iteration at the (already accurate) eigenvalue `lambda`, orthogonalized
/// against `against`.
pub fn tridiag_inverse_iteration(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    against: &[&[f64]],
    seed: u64,
) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let scale = gershgorin_bound(diag, off).max(1.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut rng = tiny_lcg(seed);
    for attempt in 0..3 {
        let shift = lambda + attempt as f64 * 10.0 * f64::EPSILON * scale;
        let lu = tridiag_lu(diag, off, shift);
        let mut v: Vec<f64> = (0..n).map(|_| rng()).collect();
        normalize(&mut v);
        let mut residual = f64::INFINITY;
        for _ in 0..5 {
            tridiag_lu_solve(&lu, &mut v);
            for o in against {
                let dot: f64 = v.iter().zip(o.iter()).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(o.iter()) {
                    *x -= dot * y;
                }
            }
            if normalize(&mut v) == 0.0 {
                v = (0..n).map(|_| rng()).collect();
                normalize(&mut v);
                continue;
            }
            let mut tv = vec![0.0; n];
            tridiag_matvec(diag, off, &v, &mut tv);
            residual = tv
                .iter()
                .zip(v.iter())
                .map(|(t, x)| (t - lambda * x) * (t - lambda * x))
                .sum::<f64>()
                .sqrt();
            if residual <= 1e-12 * scale {
                break;
            }
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, v.clone()));
        }
        if residual <= 1e-11 * scale {
            break;
        }
    }
    best.unwrap().1
}

// ---------------------------------------------------------------------
// Dense path: Householder reduction + implicit-shift QL
// ---------------------------------------------------------------------

/// Householder reduction of a symmetric matrix to tridiagonal form, with
/// the reflectors retained for applying Q to vectors later.
pub struct HouseholderReduced {
    n: usize,
    store: DenseMatrix,
    hs: Vec<f64>,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

pub fn householder_reduce(m: &DenseMatrix) -> Result<HouseholderReduced, EigError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(EigError::NonSymmetricInput);
    }
    if !m.is_symmetric(1e-12 * m.max_abs().max(1.0)) {
        return Err(EigError::NonSymmetricInput);
    }
    let mut a = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut hs = vec![0.0; n];

    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut s = 0.0;
        if l > 0 {
            for k in 0..=l {
                s += a.get(i, k).abs();
            }
        }
        if s == 0.0 {
            e[i] = a.get(i, l);
            hs[i] = 0.0;
        } else {
            for k in 0..=l {
                let v = a.get(i, k) / s;
                a.set(i, k, v);
                h += v * v;
            }
            let f = a.get(i, l);
            let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = s * g;
            h -= f * g;
            a.set(i, l, f - g);
            hs[i] = h;
            let mut f_acc = 0.0;
            for j in 0..=l {
                // form element of A*u in e[j]
                let mut g2 = 0.0;
                for k in 0..=j {
                    g2 += a.get(j, k) * a.get(i, k);
                }
                for k in (j + 1)..=l {
                    g2 += a.get(k, j) * a.get(i, k);
                }
                e[j] = g2 / h;
                f_acc += e[j] * a.get(i, j);
            }
            let hh = f_acc / (h + h);
            for j in 0..=l {
                let f2 = a.get(i, j);
                let g2 = e[j] - hh * f2;
                e[j] = g2;
                for k in 0..=j {
                    let v = a.get(j, k) - f2 * e[k] - g2 * a.get(i, k);
                    a.set(j, k, v);
                }
            }
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        d[i] = a.get(i, i);
    }
    let off = e[1..].to_vec();
    Ok(HouseholderReduced {
        n,
        store: a,
        hs,
        diag: d,
        off,
    })
}

impl HouseholderReduced {
    /// Applies Q to a vector expressed in the tridiagonal basis, returning
    /// the vector in the original basis.
    pub fn back_transform(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n);
        let mut v = z.to_vec();
        for i in 1..self.n {
            let h = self.hs[i];
            if h == 0.0 {
                continue;
            }
            let l = i - 1;
            let mut dot = 0.0;
            for k in 0..=l {
                dot += self.store.get(i, k) * v[k];
            }
            let f = dot / h;
            for k in 0..=l {
                let nv = v[k] - f * self.store.get(i, k);
                v[k] = nv;
            }
        }
        v
    }

    /// Full Q as a matrix (columns are Q e_j).
    pub fn q(&self) -> DenseMatrix {
        let n = self.n;
        let mut q = DenseMatrix::identity(n);
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| q.get(i, j)).collect();
            let t = self.back_transform(&col);
            for i in 0..n {
                q.set(i, j, t[i]);
            }
        }
        q
    }
}

/// Implicit-shift QL on a tridiagonal matrix; rotates the columns of `q`
/// along when given. `d` and `e` are overwritten (`e` is length n, with
/// the off-diagonal in `e[0..n-1]`).
pub fn ql_implicit(
    d: &mut [f64],
    e: &mut [f64],
    mut q: Option<&mut DenseMatrix>,
) -> Result<(), EigError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    assert_eq!(e.len(), n);
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd + 1e-300 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(EigError::NoConvergence("implicit-shift QL"));
            }
            let g0 = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g0.hypot(1.0);
            let sign_r = if g0 >= 0.0 { r } else { -r };
            let mut g = d[m] - d[l] + e[l] / (g0 + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let r2 = (d[i] - g) * s + 2.0 * c * b;
                p = s * r2;
                d[i + 1] = g + p;
                g = c * r2 - b;
                if let Some(qm) = q.as_deref_mut() {
                    for k in 0..qm.rows() {
                        f = qm.get(k, i + 1);
                        qm.set(k, i + 1, s * qm.get(k, i) + c * f);
                        qm.set(k, i, c * qm.get(k, i) - s * f);
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigendecomposition of a dense symmetric matrix: Householder reduction
/// followed by implicit-shift QL.
pub fn dense_sym_eigen(
    m: &DenseMatrix,
    want_vectors: bool,
) -> Result<SymmetricEigenResult, EigError> {
    let n = m.rows();
    if n == 0 {
        return Ok(SymmetricEigenResult {
            eigenvalues: Vec::new(),
            eigenvectors: want_vectors.then(Vec::new),
        });
    }
    let red = householder_reduce(m)?;
    let mut d = red.diag.clone();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&red.off);

    let mut q = if want_vectors { Some(red.q()) } else { None };
    ql_implicit(&mut d, &mut e, q.as_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = q.map(|qm| {
        order
            .iter()
            .map(|&j| (0..n).map(|i| qm.get(i, j)).collect())
            .collect()
    });
    Ok(SymmetricEigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Spectral norm. Symmetric matrices go through the eigensolver; general
/// square matrices use power iteration on `M^T M`.
pub fn operator_norm(m: &DenseMatrix) -> Result<f64, EigError> {
    let n = m.rows();
    if n == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    if m.rows() == m.cols() && m.is_symmetric(1e-13 * m.max_abs().max(1.0)) {
        let r = dense_sym_eigen(m, false)?;
        return Ok(r
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs())));
    }
    // near-degenerate top singular values stall the power iteration; the
    // eigensolver on M^T M is the cross-check route and settles it
    match power_iteration_norm(m) {
        Ok(v) => Ok(v),
        Err(EigError::NoConvergence(_)) => {
            let n = m.cols();
            let mut g = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for r in 0..m.rows() {
                        s += m.get(r, i) * m.get(r, j);
                    }
                    g.set(i, j, s);
                    g.set(j, i, s);
                }
            }
            let ev = dense_sym_eigen(&g, false)?;
            Ok(ev
                .eigenvalues
                .last()
                .copied()
                .unwrap_or(0.0)
                .max(0.0)
                .sqrt())
        }
        Err(e) => Err(e),
    }
}

fn power_iteration_norm(m: &DenseMatrix) -> Result<f64, EigError> {
    let cols = m.cols();
    let mut rng = tiny_lcg(cols as u64 + 17);
    let mut v: Vec<f64> = (0..cols).map(|_| rng()).collect();
    normalize(&mut v);
    let mut w = vec![0.0; m.rows()];
    let mut u = vec![0.0; cols];
    let mut prev = -1.0f64;
    let mut stable = 0;
    for _ in 0..20_000 {
        m.matvec(&v, &mut w);
        let sigma = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if sigma == 0.0 {
            return Ok(0.0);
        }
        m.transpose_matvec(&w, &mut u);
        v.copy_from_slice(&u);
        normalize(&mut v);
        if (sigma - prev).abs() <= 1e-10 * sigma.max(1.0) {
            stable += 1;
            if stable >= 3 {
                return Ok(sigma);
            }
        } else {
            stable = 0;
        }
        prev = sigma;
    }
    Err(EigError::NoConvergence("power iteration"))
}

/// Eigenvalues of a complex Hermitian matrix given as (real, imaginary)
/// parts, via the real symmetric 2n x 2n embedding. Each eigenvalue of
/// the embedding is doubled; pairs are fused with tolerance 1e-9.
pub fn hermitian_eigenvalues(re: &DenseMatrix, im: &DenseMatrix) -> Result<Vec<f64>, EigError> {
    let n = re.rows();
    if re.cols() != n || im.rows() != n || im.cols() != n {
        return Err(EigError::DimensionMismatch);
    }
    let scale = re.max_abs().max(im.max_abs()).max(1.0);
    for i in 0..n {
        for j in 0..n {
            if (re.get(i, j) - re.get(j, i)).abs() > 1e-12 * scale
                || (im.get(i, j) + im.get(j, i)).abs() > 1e-12 * scale
            {
                return Err(EigError::NonSymmetricInput);
            }
        }
    }
    let emb = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => re.get(ii, jj),
            (0, 1) => -im.get(ii, jj),
            _ => im.get(ii, jj),
        }
    });
    let r = dense_sym_eigen(&emb, false)?;
    let v = r.eigenvalues;
    let mut out = Vec::with_capacity(n);
    let tol = 1e-9 * scale.max(1.0);
    let mut i = 0;
    while i + 1 < v.len() {
        debug_assert!(
            v[i + 1] - v[i] <= tol,
            "embedding pair split: {} vs {}",
            v[i],
            v[i + 1]
        );
        out.push(0.5 * (v[i] + v[i + 1]));
        i += 2;
    }
    Ok(out)
}
