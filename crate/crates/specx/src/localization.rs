//! Limit operators along explicit directions to infinity, class-driven
//! enumeration of a sufficient direction family, and assembly of the
//! essential spectrum as the closed union of limit spectra.
//!
//! A direction is a deterministic generator of lattice points with
//! strictly increasing norms; it stands in for an equivalence class of
//! ways to go to infinity. Structured coefficient tags have exact
//! symbolic limits (verified numerically along the generator); tabulated
//! or composite coefficients go through Cauchy detection with doubling
//! probe radius, failing honestly when no single limit is selected.

use crate::band_core::{
    BandOperator, CoefficientFn, DecayProfile, Extension, Schedule, SoExpr, Warp,
};
use crate::lattice::LatticePoint;
use crate::limit_solvers::{
    bloch_spectrum, laurent_spectrum, two_body_spectrum_detailed, SolveError, SymbolFunction,
};
use crate::spectral_sets::SpectralSet;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Probe radii for numerical Cauchy detection double from here ...
pub const PROBE_RADIUS_MIN: i64 = 1 << 6;
/// ... up to here, then the direction is declared not converged.
pub const PROBE_RADIUS_MAX: i64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizeError {
    #[error(
        "direction {direction} does not select a single localization (residual {residual:.3e})"
    )]
    NotConverged { direction: String, residual: f64 },
    #[error("unsupported coefficient class: {0}")]
    ClassUnsupported(String),
    #[error("operator must be hermitian")]
    NotHermitian,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

// ---------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------

/// Deterministic point generators for sequence directions.
#[derive(Clone, Debug)]
pub enum SequenceSpec {
    /// Radii where a slowly oscillating expression attains `value`.
    SoCluster { expr: SoExpr, value: f64 },
    /// Midpoints between consecutive sparse centers (the off-center way
    /// to infinity).
    SparseMidpoints { schedule: Schedule },
    /// Explicit user points, strictly increasing in norm.
    Explicit(Arc<Vec<LatticePoint>>),
}

/// A computable way to infinity.
#[derive(Clone, Debug)]
pub enum Direction {
    /// n -> sign * (n+1) along `axis`; skips sparse-bump windows when the
    /// operator carries a sparse coefficient.
    AxisRay {
        axis: usize,
        sign: i8,
    },
    AlongSequence(SequenceSpec),
    /// The subsequence of sparse centers carrying one bump type.
    SparseCenterClass {
        type_index: usize,
    },
    /// Points of one residue class mod `period` along a 1D ray; for
    /// warped coefficients the residue is taken after the warp and the
    /// generator keeps clear of warp slips.
    PeriodicPhase {
        residue: i64,
        period: i64,
        sign: i8,
    },
}

impl Direction {
    pub fn toward_plus_infinity() -> Self {
        Direction::AxisRay { axis: 0, sign: 1 }
    }

    pub fn toward_minus_infinity() -> Self {
        Direction::AxisRay { axis: 0, sign: -1 }
    }

    /// A user-supplied sequence direction; the generated points must tend
    /// to infinity in norm, checked strictly over the first 64 points.
    pub fn along_points(points: Vec<LatticePoint>) -> Result<Self, LocalizeError> {
        if points.is_empty() {
            return Err(LocalizeError::ClassUnsupported(
                "an explicit direction needs at least one point".into(),
            ));
        }
        let mut prev = -1i64;
        for p in points.iter().take(64) {
            if p.norm_inf() <= prev {
                return Err(LocalizeError::ClassUnsupported(
                    "explicit direction points must strictly increase in norm".into(),
                ));
            }
            prev = p.norm_inf();
        }
        Ok(Direction::AlongSequence(SequenceSpec::Explicit(Arc::new(
            points,
        ))))
    }

    pub fn describe(&self) -> String {
        match self {
            Direction::AxisRay { axis, sign } => {
                format!(
                    "ray axis {axis} toward {}",
                    if *sign > 0 { "+inf" } else { "-inf" }
                )
            }
            Direction::AlongSequence(SequenceSpec::SoCluster { expr, value }) => {
                format!("cluster value {value:.6} of {}", expr.id())
            }
            Direction::AlongSequence(SequenceSpec::SparseMidpoints { .. }) => {
                "off-center midpoints of the sparse schedule".into()
            }
            Direction::AlongSequence(SequenceSpec::Explicit(_)) => "explicit sequence".into(),
            Direction::SparseCenterClass { type_index } => {
                format!("sparse centers of bump type {type_index}")
            }
            Direction::PeriodicPhase {
                residue,
                period,
                sign,
            } => format!(
                "residue {residue} mod {period} toward {}",
                if *sign > 0 { "+inf" } else { "-inf" }
            ),
        }
    }

    /// The n-th generator point, in the context of `op` (the operator
    /// supplies bump windows to avoid and the warp for phase targeting).
    pub fn nth_point(&self, op: &BandOperator, n: u64) -> LatticePoint {
        let dim = op.dim();
        match self {
            Direction::AxisRay { axis, sign } => {
                let v = match (dim, operator_sparse_info(op)) {
                    (1, Some(info)) => nth_clear_ray_point(&info, *sign, n as i64),
                    _ => *sign as i64 * (n as i64 + 1),
                };
                LatticePoint::axis_unit(dim, *axis, 1).scaled(v)
            }
            Direction::AlongSequence(SequenceSpec::SoCluster { expr, value }) => {
                let shift = operator_so_shift(op);
                LatticePoint::one(expr.cluster_radius(*value, n) - shift)
            }
            Direction::AlongSequence(SequenceSpec::SparseMidpoints { schedule }) => {
                let shift = operator_sparse_info(op).map_or(0, |i| i.shift);
                let c0 = schedule.center(n as usize).unwrap_or(i64::MAX / 4);
                let c1 = schedule
                    .center(n as usize + 1)
                    .unwrap_or(c0 + 2 * (n as i64 + 2));
                LatticePoint::one((c0 + c1) / 2 - shift)
            }
            Direction::AlongSequence(SequenceSpec::Explicit(pts)) => {
                let i = (n as usize).min(pts.len().saturating_sub(1));
                pts[i]
            }
            Direction::SparseCenterClass { type_index } => {
                let Some(info) = operator_sparse_info(op) else {
                    return LatticePoint::one(n as i64 + 1);
                };
                let mut seen = 0u64;
                for idx in 0.. {
                    let Some(c) = info.schedule.center(idx) else {
                        break;
                    };
                    if info.assignment.type_of(idx) == *type_index {
                        if seen == n {
                            return LatticePoint::one(c - info.shift);
                        }
                        seen += 1;
                    }
                }
                LatticePoint::one(i64::MAX / 4)
            }
            Direction::PeriodicPhase {
                residue,
                period,
                sign,
            } => {
                match operator_warp(op) {
                    Some((warp, shift)) => {
                        // points centered in slip-free stretches with
                        // theta(x + shift) in the target residue class
                        let z = slip_safe_phase_point(warp, *residue, *period, *sign, n);
                        LatticePoint::one(z.get(0) - shift)
                    }
                    None => {
                        let base = (n as i64 + 2) * period;
                        let x = match sign {
                            1 => base + residue.rem_euclid(*period),
                            _ => {
                                let raw = -base;
                                raw + (residue - raw).rem_euclid(*period)
                            }
                        };
                        LatticePoint::one(x)
                    }
                }
            }
        }
    }

    /// First generator point with norm at least `radius`. Generators have
    /// strictly increasing norms, so a doubling scan terminates.
    pub fn point_with_norm_at_least(&self, op: &BandOperator, radius: i64) -> LatticePoint {
        let mut n = 0u64;
        let mut step = 1u64;
        let mut last = self.nth_point(op, 0);
        while last.norm_inf() < radius && n < (1 << 40) {
            n += step;
            step *= 2;
            last = self.nth_point(op, n);
        }
        last
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// For the sqrtshift warp, theta is x + m on the stretch between the
/// slips at m^2-1 and (m+1)^2-1 (x > 0). The midpoint of the n-th
/// stretch, adjusted to the wanted residue of theta, stays slip-safe.
fn slip_safe_phase_point(warp: Warp, residue: i64, period: i64, sign: i8, n: u64) -> LatticePoint {
    match warp {
        Warp::Identity => {
            let base = (n as i64 + 2) * period;
            let x = if sign > 0 { base } else { -base };
            LatticePoint::one(x + (residue - x).rem_euclid(period))
        }
        Warp::SqrtShift => {
            let m = n as i64 + 4;
            let mid = m * m + m; // middle of [m^2, (m+1)^2 - 2]
            if sign > 0 {
                // theta(x) = x + m here; want theta(x) = residue mod period
                let target = residue - m;
                let x = mid + (target - mid).rem_euclid(period);
                LatticePoint::one(x)
            } else {
                // mirror stretch on the negative side: theta(x) = x - m
                let mid = -(m * m + m);
                let target = residue + m;
                let x = mid + (target - mid).rem_euclid(period);
                LatticePoint::one(x)
            }
        }
    }
}

/// How far ray generators stay clear of sparse bump centers: bump radius
/// plus this, so that comparison windows sampled around ray points never
/// touch a bump. Limit windows wider than this would be flagged honestly
/// by the numerical verification.
pub const RAY_CLEARANCE: i64 = 64;

struct SparseInfo {
    schedule: Schedule,
    assignment: crate::band_core::Assignment,
    radius: i64,
    shift: i64,
}

fn operator_sparse_info(op: &BandOperator) -> Option<SparseInfo> {
    for c in op.coeffs().values() {
        if let CoefficientFn::SparseBumps {
            schedule,
            bumps,
            assignment,
            shift,
        } = c
        {
            let r = bumps.iter().map(|b| b.radius()).max().unwrap_or(0);
            return Some(SparseInfo {
                schedule: schedule.clone(),
                assignment: assignment.clone(),
                radius: r,
                shift: *shift,
            });
        }
    }
    None
}

fn operator_so_shift(op: &BandOperator) -> i64 {
    for c in op.coeffs().values() {
        if let CoefficientFn::SlowlyOscillating { shift, .. } = c {
            return *shift;
        }
    }
    0
}

fn operator_warp(op: &BandOperator) -> Option<(Warp, i64)> {
    for c in op.coeffs().values() {
        if let CoefficientFn::WarpedPeriodic { warp, shift, .. } = c {
            return Some((*warp, *shift));
        }
    }
    None
}

/// The (n+1)-th integer along the signed ray whose distance (in the
/// coefficient's own coordinates, i.e. after the sparse shift) to every
/// center exceeds the clearance. Enumerating clear points keeps the
/// generator strictly increasing in norm.
fn nth_clear_ray_point(info: &SparseInfo, sign: i8, n: i64) -> i64 {
    let clearance = info.radius + RAY_CLEARANCE;
    // ray coordinate u >= 1 maps to lattice coordinate x = sign * u;
    // u is blocked when dist(x + shift, centers) <= clearance
    let u_interval_of_center = |c: i64| -> (i64, i64) {
        if sign > 0 {
            (c - clearance - info.shift, c + clearance - info.shift)
        } else {
            (info.shift - c - clearance, info.shift - c + clearance)
        }
    };
    let merged_blocked = |u_max: i64| -> Vec<(i64, i64)> {
        let mut ivals: Vec<(i64, i64)> = Vec::new();
        for idx in 0.. {
            let Some(c) = info.schedule.center(idx) else {
                break;
            };
            let (ulo, uhi) = u_interval_of_center(c);
            // centers increase, so for +rays intervals move right and for
            // -rays they move left; either way they eventually leave [1, u_max]
            if sign > 0 && ulo > u_max {
                break;
            }
            if sign < 0 && uhi < 1 {
                break;
            }
            let lo = ulo.max(1);
            let hi = uhi.min(u_max);
            if lo <= hi {
                ivals.push((lo, hi));
            }
        }
        ivals.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(ivals.len());
        for (lo, hi) in ivals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    };

    let mut horizon = (n + 1 + 4 * clearance).max(1024);
    loop {
        let blocked = merged_blocked(horizon);
        let mut clear_seen = 0i64;
        let mut u = 1i64;
        let mut it = blocked.iter().peekable();
        loop {
            match it.peek() {
                Some(&&(lo, hi)) if lo <= u => {
                    u = hi + 1;
                    it.next();
                }
                Some(&&(lo, _)) => {
                    let span = lo - u;
                    if clear_seen + span > n {
                        return sign as i64 * (u + (n - clear_seen));
                    }
                    clear_seen += span;
                    u = lo;
                }
                None => {
                    if u <= horizon && clear_seen + (horizon - u + 1) > n {
                        return sign as i64 * (u + (n - clear_seen));
                    }
                    break;
                }
            }
        }
        horizon *= 2;
    }
}

// ---------------------------------------------------------------------
// Limit extraction
// ---------------------------------------------------------------------

/// Convergence evidence attached to an extracted limit.
#[derive(Clone, Copy, Debug)]
pub struct Certificate {
    pub window: usize,
    pub radius: i64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitClass {
    Laurent,
    Periodic,
    TwoBody,
    /// numerically detected limit without a recognized tag
    Unclassified,
}

impl LimitClass {
    pub fn name(&self) -> &'static str {
        match self {
            LimitClass::Laurent => "laurent",
            LimitClass::Periodic => "periodic",
            LimitClass::TwoBody => "two-body",
            LimitClass::Unclassified => "unclassified",
        }
    }
}

/// A localization kappa.T of a band operator along one direction.
#[derive(Clone, Debug)]
pub struct LimitOperator {
    pub op: BandOperator,
    pub class: LimitClass,
    pub direction: Direction,
    pub certificate: Certificate,
}

/// Configuration of the localization pipeline.
#[derive(Clone, Debug)]
pub struct LocalizeConfig {
    /// half-width of the comparison window for limits
    pub window: usize,
    /// residual tolerance for exact-class certificates
    pub limit_tol: f64,
    /// cluster values sampled from a declared slowly oscillating range
    pub so_cluster_samples: usize,
    /// torus grid for Laurent symbol ranges
    pub laurent_resolution: usize,
    /// quasimomentum samples for Bloch bands
    pub bloch_k_samples: usize,
    /// band-edge exclusion zone for two-body discrete eigenvalues
    pub two_body_edge_tol: f64,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        LocalizeConfig {
            window: 8,
            limit_tol: 1e-8,
            so_cluster_samples: 21,
            laurent_resolution: 4096,
            bloch_k_samples: 256,
            two_body_edge_tol: 1e-3,
        }
    }
}

/// The limit of one coefficient along a direction: symbolic per tag where
/// the class admits it, numerical Cauchy detection otherwise.
pub fn limit_coefficient(
    f: &CoefficientFn,
    dir: &Direction,
    op_ctx: &BandOperator,
    window: usize,
    tol: f64,
) -> Result<(CoefficientFn, Certificate), LocalizeError> {
    let exact = Certificate {
        window,
        radius: 0,
        residual: 0.0,
    };
    match (f, dir) {
        (CoefficientFn::Constant(c), _) => Ok((CoefficientFn::Constant(*c), exact)),
        (CoefficientFn::Decaying { limit, .. }, _) => {
            let cert = verify_limit_window(f, dir, op_ctx, window, |_| *limit);
            if cert.residual > tol {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual: cert.residual,
                });
            }
            Ok((CoefficientFn::Constant(*limit), cert))
        }
        (
            CoefficientFn::SlowlyOscillating { expr, range, shift },
            Direction::AlongSequence(SequenceSpec::SoCluster { value, .. }),
        ) => {
            if *value < range.0 - 1e-12 || *value > range.1 + 1e-12 {
                return Err(LocalizeError::ClassUnsupported(format!(
                    "cluster value {value} outside the declared range [{}, {}]",
                    range.0, range.1
                )));
            }
            // the declared cluster value must be attained along the
            // generated sequence (tolerance 1e-6, checked far out)
            let n_check = 100_000u64;
            let x = expr.cluster_radius(*value, n_check);
            let attained = expr.eval(x + shift - shift); // expr is shift-free along its own radii
            let residual = (attained - value).abs();
            if residual > 1e-6 {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual,
                });
            }
            Ok((
                CoefficientFn::Constant(*value),
                Certificate {
                    window,
                    radius: x,
                    residual,
                },
            ))
        }
        (CoefficientFn::SlowlyOscillating { range, .. }, _) => {
            if (range.1 - range.0).abs() == 0.0 {
                return Ok((CoefficientFn::Constant(range.0), exact));
            }
            Err(LocalizeError::NotConverged {
                direction: dir.describe(),
                residual: range.1 - range.0,
            })
        }
        (CoefficientFn::Periodic { period, .. }, Direction::PeriodicPhase { residue, .. }) => {
            if period.len() != 1 {
                return Err(LocalizeError::ClassUnsupported(
                    "phase directions are one-dimensional".into(),
                ));
            }
            let out = f.shifted(LatticePoint::one(*residue));
            let cert = verify_limit_window(f, dir, op_ctx, window, |y| out.evaluate(y));
            if cert.residual > tol {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual: cert.residual,
                });
            }
            Ok((out, cert))
        }
        (CoefficientFn::Periodic { table, .. }, _) => {
            let spread = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - table.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread == 0.0 {
                return Ok((CoefficientFn::Constant(table[0]), exact));
            }
            Err(LocalizeError::NotConverged {
                direction: dir.describe(),
                residual: spread,
            })
        }
        (CoefficientFn::SparseBumps { bumps, .. }, Direction::SparseCenterClass { type_index }) => {
            let Some(profile) = bumps.get(*type_index) else {
                return Err(LocalizeError::ClassUnsupported(format!(
                    "bump type {type_index} does not exist"
                )));
            };
            // the isolated bump, centered at the origin, on a vanishing
            // background
            let table: BTreeMap<LatticePoint, f64> = profile
                .values
                .iter()
                .map(|(&o, &v)| (LatticePoint::one(o), v))
                .collect();
            let cert = verify_limit_window(f, dir, op_ctx, window, |y| {
                table.get(&y).copied().unwrap_or(0.0)
            });
            if cert.residual > tol {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual: cert.residual,
                });
            }
            Ok((
                CoefficientFn::Decaying {
                    limit: 0.0,
                    profile: DecayProfile::Table(table),
                },
                cert,
            ))
        }
        (CoefficientFn::SparseBumps { .. }, _) => {
            // any direction other than a center class eventually stays
            // clear of the (sparse) centers or is verified to; the limit
            // is the vanishing background
            let cert = verify_limit_window(f, dir, op_ctx, window, |_| 0.0);
            if cert.residual > tol {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual: cert.residual,
                });
            }
            Ok((CoefficientFn::Constant(0.0), cert))
        }
        (
            CoefficientFn::WarpedPeriodic { table, .. },
            Direction::PeriodicPhase { residue, sign, .. },
        ) => {
            // along the slip-free residue points, theta acts as x + const
            // with theta(x_n) = residue mod p, so the limit is the
            // periodic table translated by the residue
            let p = table.len() as i64;
            let out = CoefficientFn::periodic(vec![p], table.as_ref().clone())
                .expect("warp table is a valid periodic table")
                .shifted(LatticePoint::one(*residue));
            let _ = sign;
            let cert = verify_limit_window(f, dir, op_ctx, window, |y| out.evaluate(y));
            if cert.residual > tol {
                return Err(LocalizeError::NotConverged {
                    direction: dir.describe(),
                    residual: cert.residual,
                });
            }
            Ok((out, cert))
        }
        (CoefficientFn::WarpedPeriodic { table, .. }, _) => {
            let spread = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - table.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread == 0.0 {
                return Ok((CoefficientFn::Constant(table[0]), exact));
            }
            Err(LocalizeError::NotConverged {
                direction: dir.describe(),
                residual: spread,
            })
        }
        (CoefficientFn::AxisDecaying { .. }, _) => Err(LocalizeError::ClassUnsupported(
            "axis-decaying coefficients (N-body cluster interactions) have no ray family here; \
             use the dedicated N-body assembler"
                .into(),
        )),
        (CoefficientFn::Tabulated { .. }, _) | (CoefficientFn::Composite(_), _) => {
            numeric_limit(f, dir, op_ctx, window, tol)
        }
    }
}

/// Samples phi(x_r + y) over |y| <= window at the first generator points
/// past doubling radii until two successive windows agree within `tol`.
fn numeric_limit(
    f: &CoefficientFn,
    dir: &Direction,
    op_ctx: &BandOperator,
    window: usize,
    tol: f64,
) -> Result<(CoefficientFn, Certificate), LocalizeError> {
    if op_ctx.dim() != 1 {
        return Err(LocalizeError::ClassUnsupported(
            "numerical limit detection is one-dimensional".into(),
        ));
    }
    let w = window as i64;
    let sample = |x: LatticePoint| -> Vec<f64> {
        (-w..=w)
            .map(|y| f.evaluate(x + LatticePoint::one(y)))
            .collect()
    };
    let mut prev: Option<(i64, Vec<f64>)> = None;
    let mut radius = PROBE_RADIUS_MIN;
    let mut last_residual = f64::INFINITY;
    while radius <= PROBE_RADIUS_MAX {
        let x = dir.point_with_norm_at_least(op_ctx, radius);
        let cur = sample(x);
        if let Some((_, p)) = &prev {
            let residual = p
                .iter()
                .zip(cur.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            last_residual = residual;
            if residual < tol {
                return Ok((
                    CoefficientFn::Tabulated {
                        lo: -w,
                        values: Arc::new(cur),
                        extension: Extension::Clamp,
                    },
                    Certificate {
                        window,
                        radius: x.norm_inf(),
                        residual,
                    },
                ));
            }
        }
        prev = Some((x.norm_inf(), cur));
        radius *= 2;
    }
    Err(LocalizeError::NotConverged {
        direction: dir.describe(),
        residual: last_residual,
    })
}

/// Compares phi along the direction's far generator points against a
/// candidate limit function over the window; returns the certificate.
fn verify_limit_window(
    f: &CoefficientFn,
    dir: &Direction,
    op_ctx: &BandOperator,
    window: usize,
    limit: impl Fn(LatticePoint) -> f64,
) -> Certificate {
    let w = window as i64;
    let offsets: Vec<LatticePoint> = match op_ctx.dim() {
        1 => (-w..=w).map(LatticePoint::one).collect(),
        _ => {
            let mut v = Vec::with_capacity(((2 * w + 1) * (2 * w + 1)) as usize);
            for y0 in -w..=w {
                for y1 in -w..=w {
                    v.push(LatticePoint::two(y0, y1));
                }
            }
            v
        }
    };
    let mut residual = 0.0f64;
    let mut radius = 0i64;
    // far probes out to ~10^6, so slowly decaying tails are judged where
    // the limit actually lives
    for probe in [1 << 17, 1 << 20] {
        let x = dir.point_with_norm_at_least(op_ctx, probe);
        radius = x.norm_inf();
        for &yy in &offsets {
            let r = (f.evaluate(x + yy) - limit(yy)).abs();
            residual = residual.max(r);
        }
    }
    Certificate {
        window,
        radius,
        residual,
    }
}

/// kappa.T: the per-offset limits, the class tag, and the aggregated
/// certificate.
pub fn limit_operator(
    op: &BandOperator,
    dir: &Direction,
    cfg: &LocalizeConfig,
) -> Result<LimitOperator, LocalizeError> {
    let mut coeffs = BTreeMap::new();
    let mut cert = Certificate {
        window: cfg.window,
        radius: 0,
        residual: 0.0,
    };
    for (&a, c) in op.coeffs() {
        let (lim, c_cert) = limit_coefficient(c, dir, op, cfg.window, cfg.limit_tol)?;
        cert.radius = cert.radius.max(c_cert.radius);
        cert.residual = cert.residual.max(c_cert.residual);
        coeffs.insert(a, lim);
    }
    let mut has_periodic = false;
    let mut has_decaying = false;
    let mut has_other = false;
    for c in coeffs.values() {
        match c {
            CoefficientFn::Constant(_) => {}
            CoefficientFn::Periodic { .. } => has_periodic = true,
            CoefficientFn::Decaying { .. } => has_decaying = true,
            _ => has_other = true,
        }
    }
    let class = if has_other {
        LimitClass::Unclassified
    } else if has_periodic && !has_decaying {
        LimitClass::Periodic
    } else if has_decaying && !has_periodic {
        LimitClass::TwoBody
    } else if !has_periodic && !has_decaying {
        LimitClass::Laurent
    } else {
        LimitClass::Unclassified
    };
    Ok(LimitOperator {
        op: BandOperator::new(op.dim(), coeffs, op.hermitian()),
        class,
        direction: dir.clone(),
        certificate: cert,
    })
}

// ---------------------------------------------------------------------
// Sufficient families
// ---------------------------------------------------------------------

struct ClassSummary {
    so: Vec<(SoExpr, (f64, f64))>,
    periodic_lcm: Option<i64>,
    warped_lcm: Option<i64>,
    sparse_types: Option<Vec<usize>>,
    sparse_schedule: Option<Schedule>,
    any_axis_decaying: bool,
    any_unstructured: bool,
    periodic_multidim: bool,
}

fn summarize(op: &BandOperator) -> ClassSummary {
    let mut s = ClassSummary {
        so: Vec::new(),
        periodic_lcm: None,
        warped_lcm: None,
        sparse_types: None,
        sparse_schedule: None,
        any_axis_decaying: false,
        any_unstructured: false,
        periodic_multidim: false,
    };
    for c in op.coeffs().values() {
        match c {
            CoefficientFn::Constant(_) | CoefficientFn::Decaying { .. } => {}
            CoefficientFn::AxisDecaying { .. } => s.any_axis_decaying = true,
            CoefficientFn::SlowlyOscillating { expr, range, .. } => {
                s.so.push((expr.clone(), *range));
            }
            CoefficientFn::Periodic { period, table } => {
                if period.len() != 1 {
                    s.periodic_multidim = true;
                } else {
                    let spread = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        - table.iter().cloned().fold(f64::INFINITY, f64::min);
                    if spread > 0.0 {
                        let cur = s.periodic_lcm.unwrap_or(1);
                        s.periodic_lcm = Some(lcm64(cur, period[0]));
                    }
                }
            }
            CoefficientFn::SparseBumps {
                schedule,
                assignment,
                ..
            } => {
                s.sparse_types = Some(assignment.infinite_types());
                s.sparse_schedule = Some(schedule.clone());
            }
            CoefficientFn::WarpedPeriodic { table, .. } => {
                let cur = s.warped_lcm.unwrap_or(1);
                s.warped_lcm = Some(lcm64(cur, table.len() as i64));
            }
            CoefficientFn::Tabulated { .. } | CoefficientFn::Composite(_) => {
                s.any_unstructured = true;
            }
        }
    }
    s
}

fn lcm64(a: i64, b: i64) -> i64 {
    fn gcd(mut a: i64, mut b: i64) -> i64 {
        while b != 0 {
            let t = b;
            b = a % b;
            a = t;
        }
        a
    }
    a / gcd(a, b) * b
}

/// Class-driven enumeration of a direction family sufficient for the
/// operator's coefficient tags. Mixtures combine by proposing directions
/// and keeping those along which every coefficient converges; plain rays
/// are therefore dropped whenever a genuinely oscillating class is
/// present. Mixing two distinct oscillating/sparse/periodic classes in
/// one operator is refused.
pub fn sufficient_family(
    op: &BandOperator,
    cfg: &LocalizeConfig,
) -> Result<Vec<Direction>, LocalizeError> {
    let s = summarize(op);
    if s.any_unstructured {
        return Err(LocalizeError::ClassUnsupported(
            "tabulated or composite coefficients have no enumerable family; \
             extract limits along explicit directions instead"
                .into(),
        ));
    }
    if s.any_axis_decaying {
        return Err(LocalizeError::ClassUnsupported(
            "axis-decaying (N-body) interactions are assembled by the dedicated \
             cluster formula, not by ray enumeration"
                .into(),
        ));
    }
    if s.periodic_multidim {
        return Err(LocalizeError::ClassUnsupported(
            "multi-dimensional periodic localization families are not implemented".into(),
        ));
    }
    let structured_kinds = [
        !s.so.is_empty(),
        s.periodic_lcm.is_some() || s.warped_lcm.is_some(),
        s.sparse_types.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if structured_kinds > 1 {
        return Err(LocalizeError::ClassUnsupported(
            "mixtures of distinct oscillating classes (slowly oscillating / periodic / sparse) \
             in one operator are not supported"
                .into(),
        ));
    }

    if !s.so.is_empty() {
        if s.so.len() > 1 {
            return Err(LocalizeError::ClassUnsupported(
                "multiple slowly oscillating coefficients are not supported".into(),
            ));
        }
        let (expr, range) = s.so.into_iter().next().unwrap();
        let k = cfg.so_cluster_samples.max(2);
        let mut dirs = Vec::with_capacity(k);
        for j in 0..k {
            let t = j as f64 / (k - 1) as f64;
            let value = range.0 + t * (range.1 - range.0);
            dirs.push(Direction::AlongSequence(SequenceSpec::SoCluster {
                expr: expr.clone(),
                value,
            }));
        }
        return Ok(dirs);
    }

    if s.periodic_lcm.is_some() && s.warped_lcm.is_some() {
        return Err(LocalizeError::ClassUnsupported(
            "mixing warped and plainly periodic coefficients breaks the shared phase \
             generator semantics"
                .into(),
        ));
    }
    if let Some(p) = s.periodic_lcm.or(s.warped_lcm) {
        let mut dirs = Vec::with_capacity(2 * p as usize);
        for sign in [1i8, -1] {
            for r in 0..p {
                dirs.push(Direction::PeriodicPhase {
                    residue: r,
                    period: p,
                    sign,
                });
            }
        }
        return Ok(dirs);
    }

    if let Some(types) = s.sparse_types {
        // n bump types give exactly n+1 localizations: one per center
        // class plus the single off-center way to infinity (whose free
        // spectrum every two-body localization already contains)
        let mut dirs: Vec<Direction> = types
            .into_iter()
            .map(|t| Direction::SparseCenterClass { type_index: t })
            .collect();
        dirs.push(Direction::AlongSequence(SequenceSpec::SparseMidpoints {
            schedule: s.sparse_schedule.expect("sparse schedule present"),
        }));
        return Ok(dirs);
    }

    // constants and decaying coefficients only: the 2d axis rays
    let mut dirs = Vec::with_capacity(2 * op.dim());
    for axis in 0..op.dim() {
        for sign in [1i8, -1] {
            dirs.push(Direction::AxisRay { axis, sign });
        }
    }
    Ok(dirs)
}

// ---------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------

/// One row of the per-direction report.
#[derive(Clone, Debug)]
pub struct DirectionRow {
    pub direction: Direction,
    pub class: LimitClass,
    pub certificate: Certificate,
    /// canonical fingerprint of the limit operator (translates merge)
    pub canonical_key: String,
    pub spectrum: SpectralSet,
    /// spectrum contained in the union of the other localizations
    pub redundant: bool,
}

#[derive(Clone, Debug)]
pub struct EssentialSpectrum {
    pub set: SpectralSet,
    pub rows: Vec<DirectionRow>,
}

/// Canonical representative of a limit operator modulo translation:
/// periodic limits are rotated to the lexicographically smallest
/// fingerprint, two-body limits are re-anchored so their first deviation
/// sits at the origin. Translated inputs then solve bit-identical
/// subproblems, which is what makes the assembled set exactly
/// translation invariant.
fn canonicalize_limit(op: &BandOperator, class: LimitClass) -> BandOperator {
    match class {
        LimitClass::Periodic => {
            let mut p = 1i64;
            for c in op.coeffs().values() {
                if let CoefficientFn::Periodic { period, .. } = c {
                    if period.len() == 1 {
                        p = lcm64(p, period[0]);
                    }
                }
            }
            let mut best: Option<(String, BandOperator)> = None;
            for r in 0..p {
                let cand = op.translate(LatticePoint::one(r));
                let key = cand.fingerprint();
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, cand));
                }
            }
            best.map(|(_, op)| op).unwrap_or_else(|| op.clone())
        }
        LimitClass::TwoBody => {
            let mut anchor: Option<LatticePoint> = None;
            for c in op.coeffs().values() {
                if let CoefficientFn::Decaying {
                    profile: DecayProfile::Table(t),
                    ..
                } = c
                {
                    if let Some(p) = t.keys().next() {
                        anchor = Some(match anchor {
                            Some(a) if a <= *p => a,
                            _ => *p,
                        });
                    }
                }
            }
            match anchor {
                Some(a) if !a.is_zero() => op.translate(a),
                _ => op.clone(),
            }
        }
        _ => op.clone(),
    }
}

fn solve_by_class(
    lim: &BandOperator,
    class: LimitClass,
    cfg: &LocalizeConfig,
) -> Result<SpectralSet, LocalizeError> {
    match class {
        LimitClass::Laurent => {
            let sym = SymbolFunction::from_operator(lim).map_err(LocalizeError::Solve)?;
            Ok(laurent_spectrum(&sym, cfg.laurent_resolution)?)
        }
        LimitClass::Periodic => Ok(bloch_spectrum(lim, cfg.bloch_k_samples)?),
        LimitClass::TwoBody => Ok(two_body_spectrum_detailed(lim, cfg.two_body_edge_tol)?.set),
        LimitClass::Unclassified => Err(LocalizeError::ClassUnsupported(
            "cannot solve an unclassified limit operator".into(),
        )),
    }
}

/// The essential spectrum as the closed union of limit spectra over the
/// sufficient family, with the per-direction table.
pub fn essential_spectrum(
    op: &BandOperator,
    cfg: &LocalizeConfig,
) -> Result<EssentialSpectrum, LocalizeError> {
    if !op.hermitian() {
        return Err(LocalizeError::NotHermitian);
    }
    let dirs = sufficient_family(op, cfg)?;
    let mut solved: BTreeMap<String, SpectralSet> = BTreeMap::new();
    let mut rows_raw: Vec<(Direction, LimitClass, Certificate, String)> = Vec::new();
    for dir in dirs {
        let lim = limit_operator(op, &dir, cfg)?;
        let canon = canonicalize_limit(&lim.op, lim.class);
        let key = canon.fingerprint();
        if !solved.contains_key(&key) {
            let spec = solve_by_class(&canon, lim.class, cfg)?;
            solved.insert(key.clone(), spec);
        }
        rows_raw.push((dir, lim.class, lim.certificate, key));
    }
    let set = SpectralSet::closure_union(&solved.values().cloned().collect::<Vec<_>>());

    // a localization is redundant when the union of the others already
    // covers its spectrum
    let mut redundant_keys: Vec<String> = Vec::new();
    for (key, spec) in &solved {
        let others: Vec<SpectralSet> = solved
            .iter()
            .filter(|(k, _)| *k != key)
            .map(|(_, s)| s.clone())
            .collect();
        if !others.is_empty() {
            let u = SpectralSet::closure_union(&others);
            if spec.is_subset_of(&u) {
                redundant_keys.push(key.clone());
            }
        }
    }
    let rows = rows_raw
        .into_iter()
        .map(|(direction, class, certificate, key)| DirectionRow {
            direction,
            class,
            certificate,
            spectrum: solved[&key].clone(),
            redundant: redundant_keys.contains(&key),
            canonical_key: key,
        })
        .collect();
    Ok(EssentialSpectrum { set, rows })
}
