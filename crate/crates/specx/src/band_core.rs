//! Band operators on Z^d with structured bounded coefficient functions.
//!
//! An operator is T = sum_{a in A} phi_a(Q) U_a with a finite offset set A,
//! acting by (Tf)(x) = sum_a phi_a(x) f(x+a). The coefficient functions are
//! tagged by structure (constant, decaying, slowly oscillating, periodic,
//! sparse bumps, warped periodic, tabulated); the tags are what the
//! localization machinery dispatches on. Products and sums of coefficients
//! are kept as lazily evaluable compositions, not symbolically simplified.

use crate::lattice::{BoxRegion, LatticePoint};
use crate::mat::DenseMatrix;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

/// Construction-time sparseness check horizon.
pub const SPARSE_CHECK_HORIZON: i64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BandError {
    #[error("operation requires a hermitian operator")]
    NonHermitianOperator,
    #[error("truncation of {0} sites is not feasible")]
    InfeasibleSize(usize),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
}

// ---------------------------------------------------------------------
// Coefficient structure
// ---------------------------------------------------------------------

/// Deviation-from-limit shape of a decaying coefficient.
#[derive(Clone, Debug)]
pub enum DecayProfile {
    /// Absolute values at finitely many points; the limit elsewhere.
    Table(BTreeMap<LatticePoint, f64>),
    /// limit + amplitude * ratio^{|x - center|}, |ratio| < 1.
    Geometric {
        amplitude: f64,
        ratio: f64,
        center: LatticePoint,
    },
}

/// Registry of slowly oscillating expressions, referenced by stable id in
/// config files.
#[derive(Clone, Debug)]
pub enum SoExpr {
    /// amplitude * sin(sqrt(|x|))
    SinSqrtAbs { amplitude: f64 },
}

impl SoExpr {
    pub fn id(&self) -> &'static str {
        match self {
            SoExpr::SinSqrtAbs { .. } => "sin-sqrt-abs",
        }
    }

    pub fn eval(&self, x: i64) -> f64 {
        match self {
            SoExpr::SinSqrtAbs { amplitude } => amplitude * ((x.abs() as f64).sqrt()).sin(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            SoExpr::SinSqrtAbs { amplitude } => amplitude.abs(),
        }
    }

    /// A lattice radius along which the expression approaches `value`,
    /// parametrized by an index n (used to generate cluster directions).
    /// For amplitude*sin(sqrt(x)): x_n = round((2 pi n + asin(v/amp))^2).
    pub fn cluster_radius(&self, value: f64, n: u64) -> i64 {
        match self {
            SoExpr::SinSqrtAbs { amplitude } => {
                let a = if *amplitude == 0.0 { 1.0 } else { *amplitude };
                let phase = (value / a).clamp(-1.0, 1.0).asin();
                let root = 2.0 * std::f64::consts::PI * (n as f64 + 1.0) + phase;
                (root * root).round() as i64
            }
        }
    }
}

/// Lattice warp registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Warp {
    Identity,
    /// x + floor(sqrt(1 + |x|))
    SqrtShift,
}

impl Warp {
    pub fn id(&self) -> &'static str {
        match self {
            Warp::Identity => "identity",
            Warp::SqrtShift => "sqrtshift",
        }
    }

    pub fn apply(&self, x: i64) -> i64 {
        match self {
            Warp::Identity => x,
            Warp::SqrtShift => x + (1.0 + x.abs() as f64).sqrt().floor() as i64,
        }
    }
}

/// Sparse center schedules (1D).
#[derive(Clone, Debug)]
pub enum Schedule {
    /// centers (n+1)^2 = 1, 4, 9, ...
    Squares,
    /// centers 2^{n+1} = 2, 4, 8, ...
    PowersOfTwo,
    /// user table, strictly increasing
    Explicit(Arc<Vec<i64>>),
}

impl Schedule {
    pub fn id(&self) -> &'static str {
        match self {
            Schedule::Squares => "squares",
            Schedule::PowersOfTwo => "powers2",
            Schedule::Explicit(_) => "explicit",
        }
    }

    pub fn center(&self, n: usize) -> Option<i64> {
        match self {
            Schedule::Squares => {
                let k = n as i64 + 1;
                Some(k * k)
            }
            Schedule::PowersOfTwo => 1i64.checked_shl(n as u32 + 1),
            Schedule::Explicit(v) => v.get(n).copied(),
        }
    }

    /// Indices of centers within distance `radius` of `y` (at most a few).
    pub fn centers_near(&self, y: i64, radius: i64) -> Vec<(usize, i64)> {
        let mut out = Vec::new();
        match self {
            Schedule::Squares => {
                if y + radius < 1 {
                    return out;
                }
                let guess = ((y.max(1)) as f64).sqrt().round() as i64;
                for k in (guess - 2).max(1)..=(guess + 2) {
                    let c = k * k;
                    if (c - y).abs() <= radius {
                        out.push(((k - 1) as usize, c));
                    }
                }
            }
            Schedule::PowersOfTwo => {
                if y + radius < 2 {
                    return out;
                }
                let guess = (y.max(2) as f64).log2().round() as u32;
                for k in guess.saturating_sub(2)..=(guess + 2) {
                    if !(1..=62).contains(&k) {
                        continue;
                    }
                    let c = 1i64 << k;
                    if (c - y).abs() <= radius {
                        out.push(((k - 1) as usize, c));
                    }
                }
            }
            Schedule::Explicit(v) => {
                let idx = v.partition_point(|&c| c < y - radius);
                for (i, &c) in v.iter().enumerate().skip(idx) {
                    if c > y + radius {
                        break;
                    }
                    out.push((i, c));
                }
            }
        }
        out
    }
}

/// A finitely supported bump shape, offsets relative to its center.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpProfile {
    pub values: BTreeMap<i64, f64>,
}

impl BumpProfile {
    pub fn single_site(v: f64) -> Self {
        BumpProfile {
            values: [(0i64, v)].into_iter().collect(),
        }
    }

    pub fn radius(&self) -> i64 {
        self.values.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Maps center index -> bump type: a finite prefix followed by a cycle.
/// Types occurring in the cycle occur infinitely often.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

impl Assignment {
    pub fn cyclic(n_types: usize) -> Self {
        Assignment {
            prefix: Vec::new(),
            cycle: (0..n_types).collect(),
        }
    }

    pub fn type_of(&self, n: usize) -> usize {
        if n < self.prefix.len() {
            self.prefix[n]
        } else {
            self.cycle[(n - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn infinite_types(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycle.clone();
        t.sort_unstable();
        t.dedup();
        t
    }
}

/// Extension rule of a tabulated window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extension {
    ConstantBeyond(f64),
    Clamp,
}

/// A tagged structured bounded function on Z^d.
#[derive(Clone, Debug)]
pub enum CoefficientFn {
    Constant(f64),
    Decaying {
        limit: f64,
        profile: DecayProfile,
    },
    /// Depends only on one coordinate and decays in it: the cluster
    /// interactions of the lattice N-body models (d = 2).
    AxisDecaying {
        axis: usize,
        limit: f64,
        table: BTreeMap<i64, f64>,
    },
    SlowlyOscillating {
        expr: SoExpr,
        /// declared asymptotic range (cluster values at infinity)
        range: (f64, f64),
        shift: i64,
    },
    Periodic {
        period: Vec<i64>,
        /// row-major over the period cell
        table: Arc<Vec<f64>>,
    },
    SparseBumps {
        schedule: Schedule,
        bumps: Arc<Vec<BumpProfile>>,
        assignment: Assignment,
        shift: i64,
    },
    WarpedPeriodic {
        table: Arc<Vec<f64>>,
        warp: Warp,
        shift: i64,
    },
    Tabulated {
        lo: i64,
        values: Arc<Vec<f64>>,
        extension: Extension,
    },
    Composite(Arc<CompositeExpr>),
}

#[derive(Debug)]
pub enum CompositeExpr {
    Shifted {
        inner: CoefficientFn,
        by: LatticePoint,
    },
    Scaled {
        inner: CoefficientFn,
        factor: f64,
    },
    Sum(Vec<CoefficientFn>),
    Product(Vec<CoefficientFn>),
}

impl CoefficientFn {
    pub fn periodic(period: Vec<i64>, table: Vec<f64>) -> Result<Self, BandError> {
        let cell: i64 = period.iter().product();
        if period.iter().any(|&p| p < 1) || table.len() as i64 != cell {
            return Err(BandError::InvalidCoefficient(format!(
                "periodic table must have exactly {} entries, got {}",
                cell,
                table.len()
            )));
        }
        Ok(CoefficientFn::Periodic {
            period,
            table: Arc::new(table),
        })
    }

    pub fn sparse_bumps(
        schedule: Schedule,
        bumps: Vec<BumpProfile>,
        assignment: Assignment,
    ) -> Result<Self, BandError> {
        if bumps.is_empty() {
            return Err(BandError::InvalidCoefficient("no bump profiles".into()));
        }
        if assignment.cycle.is_empty() {
            return Err(BandError::InvalidCoefficient(
                "empty assignment cycle".into(),
            ));
        }
        for &t in assignment.prefix.iter().chain(assignment.cycle.iter()) {
            if t >= bumps.len() {
                return Err(BandError::InvalidCoefficient(format!(
                    "assignment references bump type {t} but only {} exist",
                    bumps.len()
                )));
            }
        }
        if let Schedule::Explicit(v) = &schedule {
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(BandError::InvalidCoefficient(
                    "explicit centers must be strictly increasing".into(),
                ));
            }
        }
        // sparseness up to the horizon: consecutive centers must stay more
        // than twice the bump radius apart; beyond the horizon the built-in
        // schedules guarantee growing gaps by construction.
        let radius = bumps.iter().map(|b| b.radius()).max().unwrap_or(0);
        let mut prev: Option<i64> = None;
        for n in 0.. {
            let Some(c) = schedule.center(n) else { break };
            if c > SPARSE_CHECK_HORIZON {
                break;
            }
            if let Some(p) = prev {
                if c - p <= 2 * radius {
                    return Err(BandError::InvalidCoefficient(format!(
                        "centers {p} and {c} are closer than twice the bump radius {radius}"
                    )));
                }
            }
            prev = Some(c);
        }
        Ok(CoefficientFn::SparseBumps {
            schedule,
            bumps: Arc::new(bumps),
            assignment,
            shift: 0,
        })
    }

    pub fn warped_periodic(table: Vec<f64>, warp: Warp) -> Result<Self, BandError> {
        if table.is_empty() {
            return Err(BandError::InvalidCoefficient("empty period table".into()));
        }
        Ok(CoefficientFn::WarpedPeriodic {
            table: Arc::new(table),
            warp,
            shift: 0,
        })
    }

    /// Total evaluation on Z^d.
    pub fn evaluate(&self, x: LatticePoint) -> f64 {
        match self {
            CoefficientFn::Constant(c) => *c,
            CoefficientFn::Decaying { limit, profile } => match profile {
                DecayProfile::Table(t) => t.get(&x).copied().unwrap_or(*limit),
                DecayProfile::Geometric {
                    amplitude,
                    ratio,
                    center,
                } => {
                    let d = (x - *center).norm_inf();
                    limit + amplitude * ratio.powi(d as i32)
                }
            },
            CoefficientFn::AxisDecaying { axis, limit, table } => {
                table.get(&x.get(*axis)).copied().unwrap_or(*limit)
            }
            CoefficientFn::SlowlyOscillating { expr, shift, .. } => expr.eval(x.get(0) + shift),
            CoefficientFn::Periodic { period, table } => {
                let mut idx = 0usize;
                for (a, &p) in period.iter().enumerate() {
                    idx = idx * p as usize + x.get(a).rem_euclid(p) as usize;
                }
                table[idx]
            }
            CoefficientFn::SparseBumps {
                schedule,
                bumps,
                assignment,
                shift,
            } => {
                let y = x.get(0) + shift;
                let radius = bumps.iter().map(|b| b.radius()).max().unwrap_or(0);
                for (n, c) in schedule.centers_near(y, radius) {
                    let b = &bumps[assignment.type_of(n)];
                    if let Some(v) = b.values.get(&(y - c)) {
                        return *v;
                    }
                }
                0.0
            }
            CoefficientFn::WarpedPeriodic { table, warp, shift } => {
                let y = x.get(0) + shift;
                let p = table.len() as i64;
                table[warp.apply(y).rem_euclid(p) as usize]
            }
            CoefficientFn::Tabulated {
                lo,
                values,
                extension,
            } => {
                let y = x.get(0);
                let i = y - lo;
                if i >= 0 && (i as usize) < values.len() {
                    values[i as usize]
                } else {
                    match extension {
                        Extension::ConstantBeyond(c) => *c,
                        Extension::Clamp => {
                            if i < 0 {
                                *values.first().unwrap()
                            } else {
                                *values.last().unwrap()
                            }
                        }
                    }
                }
            }
            CoefficientFn::Composite(e) => match e.as_ref() {
                CompositeExpr::Shifted { inner, by } => inner.evaluate(x + *by),
                CompositeExpr::Scaled { inner, factor } => factor * inner.evaluate(x),
                CompositeExpr::Sum(terms) => terms.iter().map(|t| t.evaluate(x)).sum(),
                CompositeExpr::Product(terms) => terms.iter().map(|t| t.evaluate(x)).product(),
            },
        }
    }

    /// A computable bound on sup |phi|.
    pub fn sup_bound(&self) -> f64 {
        match self {
            CoefficientFn::Constant(c) => c.abs(),
            CoefficientFn::Decaying { limit, profile } => match profile {
                DecayProfile::Table(t) => t.values().fold(limit.abs(), |m, v| m.max(v.abs())),
                DecayProfile::Geometric { amplitude, .. } => limit.abs() + amplitude.abs(),
            },
            CoefficientFn::AxisDecaying { limit, table, .. } => {
                table.values().fold(limit.abs(), |m, v| m.max(v.abs()))
            }
            CoefficientFn::SlowlyOscillating { expr, .. } => expr.amplitude(),
            CoefficientFn::Periodic { table, .. } => {
                table.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
            CoefficientFn::SparseBumps { bumps, .. } => {
                bumps.iter().fold(0.0f64, |m, b| m.max(b.max_abs()))
            }
            CoefficientFn::WarpedPeriodic { table, .. } => {
                table.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
            CoefficientFn::Tabulated {
                values, extension, ..
            } => {
                let base = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                match extension {
                    Extension::ConstantBeyond(c) => base.max(c.abs()),
                    Extension::Clamp => base,
                }
            }
            CoefficientFn::Composite(e) => match e.as_ref() {
                CompositeExpr::Shifted { inner, .. } => inner.sup_bound(),
                CompositeExpr::Scaled { inner, factor } => factor.abs() * inner.sup_bound(),
                CompositeExpr::Sum(terms) => terms.iter().map(|t| t.sup_bound()).sum(),
                CompositeExpr::Product(terms) => terms.iter().map(|t| t.sup_bound()).product(),
            },
        }
    }

    /// The translate y -> phi(y + by), structural where the tag allows it.
    pub fn shifted(&self, by: LatticePoint) -> CoefficientFn {
        if by.is_zero() {
            return self.clone();
        }
        match self {
            CoefficientFn::Constant(c) => CoefficientFn::Constant(*c),
            CoefficientFn::Decaying { limit, profile } => {
                let profile = match profile {
                    DecayProfile::Table(t) => {
                        DecayProfile::Table(t.iter().map(|(p, v)| (*p - by, *v)).collect())
                    }
                    DecayProfile::Geometric {
                        amplitude,
                        ratio,
                        center,
                    } => DecayProfile::Geometric {
                        amplitude: *amplitude,
                        ratio: *ratio,
                        center: *center - by,
                    },
                };
                CoefficientFn::Decaying {
                    limit: *limit,
                    profile,
                }
            }
            CoefficientFn::AxisDecaying { axis, limit, table } => CoefficientFn::AxisDecaying {
                axis: *axis,
                limit: *limit,
                table: table
                    .iter()
                    .map(|(p, v)| (*p - by.get(*axis), *v))
                    .collect(),
            },
            CoefficientFn::SlowlyOscillating { expr, range, shift } => {
                CoefficientFn::SlowlyOscillating {
                    expr: expr.clone(),
                    range: *range,
                    shift: shift + by.get(0),
                }
            }
            CoefficientFn::Periodic { period, table } => {
                let rotated = rotate_table(period, table, by);
                CoefficientFn::Periodic {
                    period: period.clone(),
                    table: Arc::new(rotated),
                }
            }
            CoefficientFn::SparseBumps {
                schedule,
                bumps,
                assignment,
                shift,
            } => CoefficientFn::SparseBumps {
                schedule: schedule.clone(),
                bumps: bumps.clone(),
                assignment: assignment.clone(),
                shift: shift + by.get(0),
            },
            CoefficientFn::WarpedPeriodic { table, warp, shift } => CoefficientFn::WarpedPeriodic {
                table: table.clone(),
                warp: *warp,
                shift: shift + by.get(0),
            },
            CoefficientFn::Tabulated {
                lo,
                values,
                extension,
            } => CoefficientFn::Tabulated {
                lo: lo - by.get(0),
                values: values.clone(),
                extension: *extension,
            },
            CoefficientFn::Composite(e) => {
                if let CompositeExpr::Shifted { inner, by: b0 } = e.as_ref() {
                    return CoefficientFn::Composite(Arc::new(CompositeExpr::Shifted {
                        inner: inner.clone(),
                        by: *b0 + by,
                    }));
                }
                CoefficientFn::Composite(Arc::new(CompositeExpr::Shifted {
                    inner: self.clone(),
                    by,
                }))
            }
        }
    }

    /// Structured tags support symbolic limit extraction; tabulated and
    /// composite coefficients only the numerical path.
    pub fn is_structured(&self) -> bool {
        !matches!(
            self,
            CoefficientFn::Tabulated { .. } | CoefficientFn::Composite(_)
        )
    }

    /// Stable structural fingerprint, used to key the localization dedup
    /// cache after canonicalization.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        self.write_fingerprint(&mut s);
        s
    }

    fn write_fingerprint(&self, s: &mut String) {
        match self {
            CoefficientFn::Constant(c) => {
                let _ = write!(s, "const({c:.17e})");
            }
            CoefficientFn::Decaying { limit, profile } => {
                let _ = write!(s, "decay({limit:.17e};");
                match profile {
                    DecayProfile::Table(t) => {
                        for (p, v) in t {
                            let _ = write!(s, "{p}:{v:.17e},");
                        }
                    }
                    DecayProfile::Geometric {
                        amplitude,
                        ratio,
                        center,
                    } => {
                        let _ = write!(s, "geo {amplitude:.17e} {ratio:.17e} @{center}");
                    }
                }
                s.push(')');
            }
            CoefficientFn::AxisDecaying { axis, limit, table } => {
                let _ = write!(s, "axisdecay({axis};{limit:.17e};");
                for (p, v) in table {
                    let _ = write!(s, "{p}:{v:.17e},");
                }
                s.push(')');
            }
            CoefficientFn::SlowlyOscillating { expr, range, shift } => {
                let _ = write!(
                    s,
                    "so({};{:.17e},{:.17e};{shift})",
                    expr.id(),
                    range.0,
                    range.1
                );
            }
            CoefficientFn::Periodic { period, table } => {
                let _ = write!(s, "per({period:?};");
                for v in table.iter() {
                    let _ = write!(s, "{v:.17e},");
                }
                s.push(')');
            }
            CoefficientFn::SparseBumps {
                schedule,
                bumps,
                assignment,
                shift,
            } => {
                let _ = write!(
                    s,
                    "sparse({};{}types;{:?}/{:?};{shift})",
                    schedule.id(),
                    bumps.len(),
                    assignment.prefix,
                    assignment.cycle
                );
            }
            CoefficientFn::WarpedPeriodic { table, warp, shift } => {
                let _ = write!(s, "warp({};{shift};", warp.id());
                for v in table.iter() {
                    let _ = write!(s, "{v:.17e},");
                }
                s.push(')');
            }
            CoefficientFn::Tabulated {
                lo,
                values,
                extension,
            } => {
                let _ = write!(s, "tab({lo};{};{extension:?})", values.len());
            }
            CoefficientFn::Composite(e) => {
                s.push_str("cmp(");
                match e.as_ref() {
                    CompositeExpr::Shifted { inner, by } => {
                        let _ = write!(s, "shift {by} ");
                        inner.write_fingerprint(s);
                    }
                    CompositeExpr::Scaled { inner, factor } => {
                        let _ = write!(s, "scale {factor:.17e} ");
                        inner.write_fingerprint(s);
                    }
                    CompositeExpr::Sum(terms) => {
                        s.push_str("sum ");
                        for t in terms {
                            t.write_fingerprint(s);
                        }
                    }
                    CompositeExpr::Product(terms) => {
                        s.push_str("prod ");
                        for t in terms {
                            t.write_fingerprint(s);
                        }
                    }
                }
                s.push(')');
            }
        }
    }
}

/// Rotated periodic table: out[index(y)] = table[index(y + by)].
fn rotate_table(period: &[i64], table: &[f64], by: LatticePoint) -> Vec<f64> {
    let mut out = vec![0.0; table.len()];
    let d = period.len();
    let mut coords = vec![0i64; d];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut rem = i;
        for a in (0..d).rev() {
            coords[a] = (rem % period[a] as usize) as i64;
            rem /= period[a] as usize;
        }
        let mut src = 0usize;
        for a in 0..d {
            src = src * period[a] as usize + (coords[a] + by.get(a)).rem_euclid(period[a]) as usize;
        }
        *slot = table[src];
    }
    out
}

// ---------------------------------------------------------------------
// Band operators
// ---------------------------------------------------------------------

/// T = sum_{a in A} phi_a(Q) U_a, (Tf)(x) = sum_a phi_a(x) f(x+a).
#[derive(Clone, Debug)]
pub struct BandOperator {
    dim: usize,
    coeffs: BTreeMap<LatticePoint, CoefficientFn>,
    hermitian: bool,
}

impl BandOperator {
    pub fn new(dim: usize, coeffs: BTreeMap<LatticePoint, CoefficientFn>, hermitian: bool) -> Self {
        assert!(dim == 1 || dim == 2);
        for a in coeffs.keys() {
            assert_eq!(a.dim(), dim, "offset dimension mismatch");
        }
        BandOperator {
            dim,
            coeffs,
            hermitian,
        }
    }

    /// Constant symmetric hopping plus a real on-site potential; hermitian
    /// by construction.
    pub fn from_hopping_and_potential(
        dim: usize,
        hopping: &[(LatticePoint, f64)],
        potential: Option<CoefficientFn>,
    ) -> Self {
        let mut coeffs = BTreeMap::new();
        for &(a, w) in hopping {
            assert!(!a.is_zero(), "hopping offset must be nonzero");
            coeffs.insert(a, CoefficientFn::Constant(w));
            coeffs.insert(-a, CoefficientFn::Constant(w));
        }
        if let Some(v) = potential {
            coeffs.insert(LatticePoint::zero(dim), v);
        }
        BandOperator::new(dim, coeffs, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn offsets(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn coeffs(&self) -> &BTreeMap<LatticePoint, CoefficientFn> {
        &self.coeffs
    }

    pub fn coeff(&self, a: LatticePoint) -> Option<&CoefficientFn> {
        self.coeffs.get(&a)
    }

    pub fn evaluate(&self, a: LatticePoint, x: LatticePoint) -> f64 {
        self.coeffs.get(&a).map_or(0.0, |c| c.evaluate(x))
    }

    /// max_a |a|_inf over the offset set.
    pub fn band_radius(&self) -> i64 {
        self.coeffs.keys().map(|a| a.norm_inf()).max().unwrap_or(0)
    }

    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.sup_bound()).sum()
    }

    pub fn fingerprint(&self) -> String {
        let mut s = format!("d{};h{};", self.dim, self.hermitian);
        for (a, c) in &self.coeffs {
            let _ = write!(s, "[{a}]=");
            s.push_str(&c.fingerprint());
            s.push(';');
        }
        s
    }

    /// x.T = U_x T U_x^*: same offsets, coefficient at a becomes
    /// y -> phi_a(y + x).
    pub fn translate(&self, x: LatticePoint) -> BandOperator {
        BandOperator {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, c)| (*a, c.shifted(x)))
                .collect(),
            hermitian: self.hermitian,
        }
    }

    /// Samples the hermiticity condition phi_{-a}(x) = phi_a(x - a).
    pub fn hermitian_sampled(&self, probes: &[LatticePoint]) -> bool {
        for (&a, c) in &self.coeffs {
            let Some(cm) = self.coeffs.get(&-a) else {
                return false;
            };
            for &x in probes {
                if (cm.evaluate(x) - c.evaluate(x - a)).abs() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    pub fn add(&self, other: &BandOperator) -> BandOperator {
        assert_eq!(self.dim, other.dim);
        let mut coeffs = self.coeffs.clone();
        for (a, c) in &other.coeffs {
            match coeffs.remove(a) {
                None => {
                    coeffs.insert(*a, c.clone());
                }
                Some(mine) => {
                    let merged = match (&mine, c) {
                        (CoefficientFn::Constant(u), CoefficientFn::Constant(v)) => {
                            CoefficientFn::Constant(u + v)
                        }
                        _ => CoefficientFn::Composite(Arc::new(CompositeExpr::Sum(vec![
                            mine.clone(),
                            c.clone(),
                        ]))),
                    };
                    coeffs.insert(*a, merged);
                }
            }
        }
        BandOperator {
            dim: self.dim,
            coeffs,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn scale(&self, factor: f64) -> BandOperator {
        BandOperator {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, c)| {
                    let scaled = match c {
                        CoefficientFn::Constant(v) => CoefficientFn::Constant(factor * v),
                        _ => CoefficientFn::Composite(Arc::new(CompositeExpr::Scaled {
                            inner: c.clone(),
                            factor,
                        })),
                    };
                    (*a, scaled)
                })
                .collect(),
            hermitian: self.hermitian,
        }
    }

    /// Adjoint: coefficient at -a is x -> phi_a(x - a).
    pub fn adjoint(&self) -> BandOperator {
        BandOperator {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, c)| (-*a, c.shifted(-*a)))
                .collect(),
            hermitian: self.hermitian,
        }
    }

    /// Operator product: offsets add (Minkowski), coefficient at c is
    /// x -> sum_{a+b=c} phi^A_a(x) phi^B_b(x+a), kept as a lazily
    /// evaluable composition.
    pub fn multiply(&self, other: &BandOperator) -> BandOperator {
        assert_eq!(self.dim, other.dim);
        let mut terms: BTreeMap<LatticePoint, Vec<CoefficientFn>> = BTreeMap::new();
        for (&a, ca) in &self.coeffs {
            for (&b, cb) in &other.coeffs {
                let term = match (ca, cb) {
                    (CoefficientFn::Constant(u), CoefficientFn::Constant(v)) => {
                        CoefficientFn::Constant(u * v)
                    }
                    _ => CoefficientFn::Composite(Arc::new(CompositeExpr::Product(vec![
                        ca.clone(),
                        cb.shifted(a),
                    ]))),
                };
                terms.entry(a + b).or_default().push(term);
            }
        }
        let coeffs = terms
            .into_iter()
            .map(|(c, ts)| {
                let merged = if ts.len() == 1 {
                    ts.into_iter().next().unwrap()
                } else if ts.iter().all(|t| matches!(t, CoefficientFn::Constant(_))) {
                    CoefficientFn::Constant(
                        ts.iter()
                            .map(|t| match t {
                                CoefficientFn::Constant(v) => *v,
                                _ => unreachable!(),
                            })
                            .sum(),
                    )
                } else {
                    CoefficientFn::Composite(Arc::new(CompositeExpr::Sum(ts)))
                };
                (c, merged)
            })
            .collect();
        BandOperator {
            dim: self.dim,
            coeffs,
            hermitian: false,
        }
    }

    /// Finite section with Dirichlet boundary: couplings leaving the box
    /// are dropped.
    pub fn truncate(&self, region: BoxRegion) -> Result<TruncationMatrix, BandError> {
        if !self.hermitian {
            return Err(BandError::NonHermitianOperator);
        }
        assert_eq!(region.dim(), self.dim);
        let n = region.volume();
        let tridiagonal = self.dim == 1 && self.band_radius() <= 1;
        if tridiagonal {
            if n > 4_000_000 {
                return Err(BandError::InfeasibleSize(n));
            }
            let lo = region.lo.get(0);
            let diag: Vec<f64> = (0..n as i64)
                .map(|i| self.evaluate(LatticePoint::zero(1), LatticePoint::one(lo + i)))
                .collect();
            let plus = LatticePoint::one(1);
            let minus = LatticePoint::one(-1);
            let off: Vec<f64> = (0..n as i64 - 1)
                .map(|i| {
                    let x = LatticePoint::one(lo + i);
                    if self.coeffs.contains_key(&plus) {
                        self.evaluate(plus, x)
                    } else {
                        self.evaluate(minus, x + plus)
                    }
                })
                .collect();
            return Ok(TruncationMatrix {
                region,
                bc: BoundaryCondition::Dirichlet,
                data: TruncationData::Tridiagonal { diag, off },
            });
        }
        if n > 6_000 {
            return Err(BandError::InfeasibleSize(n));
        }
        let mut m = DenseMatrix::zeros(n, n);
        for x in region.iter() {
            let i = region.index_of(x);
            for (&a, c) in &self.coeffs {
                let y = x + a;
                if region.contains(y) {
                    m.set(i, region.index_of(y), c.evaluate(x));
                }
            }
        }
        Ok(TruncationMatrix {
            region,
            bc: BoundaryCondition::Dirichlet,
            data: TruncationData::Dense(m),
        })
    }
}

#[derive(Clone, Debug)]
pub enum TruncationData {
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
    Dense(DenseMatrix),
}

/// Boundary condition of a finite section. Dirichlet (drop out-of-box
/// couplings) keeps the matrix symmetric and is the only rule offered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
}

/// A finite symmetric section of a band operator over a box.
#[derive(Clone, Debug)]
pub struct TruncationMatrix {
    pub region: BoxRegion,
    pub bc: BoundaryCondition,
    pub data: TruncationData,
}

impl TruncationMatrix {
    pub fn n(&self) -> usize {
        match &self.data {
            TruncationData::Tridiagonal { diag, .. } => diag.len(),
            TruncationData::Dense(m) => m.rows(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.data {
            TruncationData::Tridiagonal { diag, off } => {
                if i == j {
                    diag[i]
                } else if i + 1 == j || j + 1 == i {
                    off[i.min(j)]
                } else {
                    0.0
                }
            }
            TruncationData::Dense(m) => m.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.data {
            TruncationData::Tridiagonal { diag, off } => {
                let n = diag.len();
                DenseMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        diag[i]
                    } else if i + 1 == j || j + 1 == i {
                        off[i.min(j)]
                    } else {
                        0.0
                    }
                })
            }
            TruncationData::Dense(m) => m.clone(),
        }
    }

    pub fn is_symmetric_exact(&self) -> bool {
        match &self.data {
            TruncationData::Tridiagonal { .. } => true,
            TruncationData::Dense(m) => {
                (0..m.rows()).all(|i| (0..m.cols()).all(|j| m.get(i, j) == m.get(j, i)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hopping_1d() -> BandOperator {
        BandOperator::from_hopping_and_potential(1, &[(LatticePoint::one(1), 1.0)], None)
    }

    fn probes_1d() -> Vec<LatticePoint> {
        (-20..=20).map(LatticePoint::one).collect()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(
            CoefficientFn::Constant(1.5).evaluate(LatticePoint::one(7)),
            1.5
        );
        let p = CoefficientFn::periodic(vec![2], vec![0.0, 3.0]).unwrap();
        assert_eq!(p.evaluate(LatticePoint::one(5)), 3.0);
        let so = CoefficientFn::SlowlyOscillating {
            expr: SoExpr::SinSqrtAbs { amplitude: 1.0 },
            range: (-1.0, 1.0),
            shift: 0,
        };
        assert_eq!(so.evaluate(LatticePoint::one(0)), 0.0);
    }

    #[test]
    fn sup_bounds_hold_on_samples() {
        let fns = vec![
            CoefficientFn::Constant(-2.5),
            CoefficientFn::periodic(vec![3], vec![1.0, -4.0, 2.0]).unwrap(),
            CoefficientFn::SlowlyOscillating {
                expr: SoExpr::SinSqrtAbs { amplitude: 2.0 },
                range: (-2.0, 2.0),
                shift: 3,
            },
            CoefficientFn::Decaying {
                limit: 0.5,
                profile: DecayProfile::Geometric {
                    amplitude: -3.0,
                    ratio: 0.5,
                    center: LatticePoint::one(2),
                },
            },
        ];
        for f in &fns {
            let b = f.sup_bound();
            for x in probes_1d() {
                assert!(f.evaluate(x).abs() <= b + 1e-12);
            }
        }
    }

    #[test]
    fn translate_examples() {
        // translate by 0 is the identity
        let op = hopping_1d();
        let t = op.translate(LatticePoint::one(0));
        for x in probes_1d() {
            for a in op.offsets() {
                assert_eq!(op.evaluate(a, x), t.evaluate(a, x));
            }
        }
        // pure hopping is translation invariant
        let t = op.translate(LatticePoint::one(13));
        for x in probes_1d() {
            for a in op.offsets() {
                assert_eq!(op.evaluate(a, x), t.evaluate(a, x));
            }
        }
        // periodic table rotates
        let p = CoefficientFn::periodic(vec![2], vec![0.0, 3.0]).unwrap();
        let q = p.shifted(LatticePoint::one(1));
        assert_eq!(q.evaluate(LatticePoint::one(0)), 3.0);
        assert_eq!(q.evaluate(LatticePoint::one(1)), 0.0);
    }

    #[test]
    fn translation_homomorphism_sampled() {
        let v = CoefficientFn::periodic(vec![3], vec![0.0, 1.0, -2.0]).unwrap();
        let op =
            BandOperator::from_hopping_and_potential(1, &[(LatticePoint::one(1), 1.0)], Some(v));
        let x = LatticePoint::one(5);
        let y = LatticePoint::one(-8);
        let ab = op.translate(x).translate(y);
        let c = op.translate(x + y);
        for p in probes_1d() {
            for a in op.offsets() {
                assert_eq!(ab.evaluate(a, p), c.evaluate(a, p));
            }
        }
    }

    #[test]
    fn multiply_one_term_convolution() {
        // (phi(Q) U_1)(psi(Q) U_1): coefficient at 2 is x -> phi(x) psi(x+1)
        let phi = CoefficientFn::periodic(vec![2], vec![1.0, -1.0]).unwrap();
        let psi = CoefficientFn::periodic(vec![3], vec![0.5, 2.0, -3.0]).unwrap();
        let a = BandOperator::new(
            1,
            [(LatticePoint::one(1), phi.clone())].into_iter().collect(),
            false,
        );
        let b = BandOperator::new(
            1,
            [(LatticePoint::one(1), psi.clone())].into_iter().collect(),
            false,
        );
        let prod = a.multiply(&b);
        assert_eq!(prod.coeffs().len(), 1);
        for x in probes_1d() {
            let expect = phi.evaluate(x) * psi.evaluate(x + LatticePoint::one(1));
            assert_eq!(prod.evaluate(LatticePoint::one(2), x), expect);
        }
    }

    #[test]
    fn multiply_identity_and_hopping_squared() {
        let op = hopping_1d();
        let id = BandOperator::new(
            1,
            [(LatticePoint::one(0), CoefficientFn::Constant(1.0))]
                .into_iter()
                .collect(),
            true,
        );
        let prod = op.multiply(&id);
        for x in probes_1d() {
            for a in op.offsets() {
                assert_eq!(prod.evaluate(a, x), op.evaluate(a, x));
            }
        }

        let sq = op.multiply(&op);
        let offsets: Vec<i64> = sq.offsets().map(|a| a.get(0)).collect();
        assert_eq!(offsets, vec![-2, 0, 2]);
        let x = LatticePoint::one(4);
        assert_eq!(sq.evaluate(LatticePoint::one(-2), x), 1.0);
        assert_eq!(sq.evaluate(LatticePoint::one(0), x), 2.0);
        assert_eq!(sq.evaluate(LatticePoint::one(2), x), 1.0);
    }

    #[test]
    fn multiply_agrees_with_dense_product() {
        // random band operators with offsets in [-2, 2]: truncation of the
        // product on an interior window equals the product of padded
        // truncations restricted there
        let mut state = 2024u64;
        let mut rnd = move || {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let mk = |rnd: &mut dyn FnMut() -> f64| {
                let mut coeffs = BTreeMap::new();
                for a in -2i64..=2 {
                    let table: Vec<f64> = (0..3).map(|_| rnd()).collect();
                    coeffs.insert(
                        LatticePoint::one(a),
                        CoefficientFn::periodic(vec![3], table).unwrap(),
                    );
                }
                BandOperator::new(1, coeffs, false)
            };
            let a = mk(&mut rnd);
            let b = mk(&mut rnd);
            let prod = a.multiply(&b);

            let pad = BoxRegion::new(LatticePoint::one(-14), LatticePoint::one(14));
            let build = |op: &BandOperator| {
                let n = pad.volume();
                DenseMatrix::from_fn(n, n, |i, j| {
                    let x = pad.point_at(i);
                    let y = pad.point_at(j);
                    op.evaluate(y - x, x)
                })
            };
            let ma = build(&a);
            let mb = build(&b);
            let mp = ma.matmul(&mb);
            let direct = build(&prod);
            // interior window where no truncation artifacts reach
            for i in 0..pad.volume() {
                for j in 0..pad.volume() {
                    let x = pad.point_at(i);
                    let y = pad.point_at(j);
                    if x.get(0).abs() <= 10 && y.get(0).abs() <= 10 {
                        assert!(
                            (mp.get(i, j) - direct.get(i, j)).abs() < 1e-12,
                            "mismatch at ({x}, {y})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn add_scale_adjoint() {
        let v = CoefficientFn::periodic(vec![2], vec![0.0, 3.0]).unwrap();
        let op =
            BandOperator::from_hopping_and_potential(1, &[(LatticePoint::one(1), 1.0)], Some(v));
        // A + (-1) A evaluates to zero
        let z = op.add(&op.scale(-1.0));
        for x in probes_1d() {
            for a in z.offsets() {
                assert_eq!(z.evaluate(a, x), 0.0);
            }
        }
        // adjoint of a hermitian operator equals it at sampled points
        let adj = op.adjoint();
        for x in probes_1d() {
            for a in op.offsets() {
                assert!((adj.evaluate(a, x) - op.evaluate(a, x)).abs() < 1e-15);
            }
        }
        // adjoint(phi(Q) U_1) = phi(.-1)(Q) U_{-1}
        let phi = CoefficientFn::periodic(vec![3], vec![1.0, 2.0, 4.0]).unwrap();
        let one_sided = BandOperator::new(
            1,
            [(LatticePoint::one(1), phi.clone())].into_iter().collect(),
            false,
        );
        let adj = one_sided.adjoint();
        for x in probes_1d() {
            assert_eq!(
                adj.evaluate(LatticePoint::one(-1), x),
                phi.evaluate(x - LatticePoint::one(1))
            );
        }
    }

    #[test]
    fn hermitian_sampling_detects_defects() {
        let op = hopping_1d();
        assert!(op.hermitian_sampled(&probes_1d()));
        let bad = BandOperator::new(
            1,
            [
                (LatticePoint::one(1), CoefficientFn::Constant(1.0)),
                (LatticePoint::one(-1), CoefficientFn::Constant(2.0)),
            ]
            .into_iter()
            .collect(),
            false,
        );
        assert!(!bad.hermitian_sampled(&probes_1d()));
    }

    #[test]
    fn truncate_hopping_examples() {
        let op = hopping_1d();
        let t = op
            .truncate(BoxRegion::new(LatticePoint::one(1), LatticePoint::one(3)))
            .unwrap();
        assert_eq!(t.n(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i as i64 - j as i64).abs() == 1 {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(t.entry(i, j), expect);
            }
        }

        let v = CoefficientFn::Decaying {
            limit: 0.0,
            profile: DecayProfile::Table([(LatticePoint::one(0), -3.0)].into_iter().collect()),
        };
        let op =
            BandOperator::from_hopping_and_potential(1, &[(LatticePoint::one(1), 1.0)], Some(v));
        let t = op
            .truncate(BoxRegion::new(LatticePoint::one(-1), LatticePoint::one(1)))
            .unwrap();
        assert_eq!(t.entry(0, 0), 0.0);
        assert_eq!(t.entry(1, 1), -3.0);
        assert_eq!(t.entry(2, 2), 0.0);
        assert_eq!(t.entry(0, 1), 1.0);
    }

    #[test]
    fn truncate_2d_separable_adjacency() {
        let op = BandOperator::from_hopping_and_potential(
            2,
            &[
                (LatticePoint::two(1, 0), 1.0),
                (LatticePoint::two(0, 1), 1.0),
            ],
            None,
        );
        let t = op
            .truncate(BoxRegion::new(
                LatticePoint::two(0, 0),
                LatticePoint::two(1, 1),
            ))
            .unwrap();
        assert_eq!(t.n(), 4);
        assert!(t.is_symmetric_exact());
        for i in 0..4 {
            let row_sum: f64 = (0..4).filter(|&j| j != i).map(|j| t.entry(i, j)).sum();
            assert!(row_sum <= 4.0);
            assert_eq!(row_sum, 2.0); // each 2x2 corner has two neighbors
        }
    }

    #[test]
    fn truncate_requires_hermitian_flag() {
        let op = BandOperator::new(
            1,
            [(LatticePoint::one(1), CoefficientFn::Constant(1.0))]
                .into_iter()
                .collect(),
            false,
        );
        assert_eq!(
            op.truncate(BoxRegion::centered(1, 8)).unwrap_err(),
            BandError::NonHermitianOperator
        );
    }

    #[test]
    fn truncation_symmetric_and_nested() {
        let v = CoefficientFn::periodic(vec![2], vec![0.0, 3.0]).unwrap();
        let op =
            BandOperator::from_hopping_and_potential(1, &[(LatticePoint::one(1), 1.0)], Some(v));
        for n in [4usize, 9, 32] {
            let t = op.truncate(BoxRegion::centered(1, n)).unwrap();
            assert!(t.is_symmetric_exact());
        }
        // Dirichlet monotone consistency: interior entries agree exactly
        let big = op.truncate(BoxRegion::centered(1, 64)).unwrap();
        let small_region = BoxRegion::centered(1, 16);
        let small = op.truncate(small_region).unwrap();
        for x in small_region.iter() {
            for y in small_region.iter() {
                if (x - y).norm_inf() <= 1 {
                    let bi = big.region.index_of(x);
                    let bj = big.region.index_of(y);
                    let si = small_region.index_of(x);
                    let sj = small_region.index_of(y);
                    assert_eq!(big.entry(bi, bj), small.entry(si, sj));
                }
            }
        }
    }

    #[test]
    fn sparse_construction_checks() {
        let ok = CoefficientFn::sparse_bumps(
            Schedule::Squares,
            vec![BumpProfile::single_site(-3.0)],
            Assignment::cyclic(1),
        );
        assert!(ok.is_ok());

        let too_close = CoefficientFn::sparse_bumps(
            Schedule::Explicit(Arc::new(vec![10, 12])),
            vec![BumpProfile {
                values: [(-2i64, 1.0), (0, -3.0), (2, 1.0)].into_iter().collect(),
            }],
            Assignment::cyclic(1),
        );
        assert!(too_close.is_err());

        let decreasing = CoefficientFn::sparse_bumps(
            Schedule::Explicit(Arc::new(vec![10, 5])),
            vec![BumpProfile::single_site(-3.0)],
            Assignment::cyclic(1),
        );
        assert!(decreasing.is_err());
    }

    #[test]
    fn sparse_evaluation_places_bumps() {
        let c = CoefficientFn::sparse_bumps(
            Schedule::Squares,
            vec![
                BumpProfile::single_site(-3.0),
                BumpProfile::single_site(5.0),
            ],
            Assignment::cyclic(2),
        )
        .unwrap();
        // centers 1, 4, 9, 16 with alternating types
        assert_eq!(c.evaluate(LatticePoint::one(1)), -3.0);
        assert_eq!(c.evaluate(LatticePoint::one(4)), 5.0);
        assert_eq!(c.evaluate(LatticePoint::one(9)), -3.0);
        assert_eq!(c.evaluate(LatticePoint::one(16)), 5.0);
        assert_eq!(c.evaluate(LatticePoint::one(2)), 0.0);
        assert_eq!(c.evaluate(LatticePoint::one(-4)), 0.0);
    }

    #[test]
    fn warped_periodic_identity_matches_periodic() {
        let w = CoefficientFn::warped_periodic(vec![0.0, 3.0], Warp::Identity).unwrap();
        let p = CoefficientFn::periodic(vec![2], vec![0.0, 3.0]).unwrap();
        for x in probes_1d() {
            assert_eq!(w.evaluate(x), p.evaluate(x));
        }
    }
}
