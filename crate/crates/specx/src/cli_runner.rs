//! Configuration ingestion, command dispatch, result serialization and
//! comparison reports.
//!
//! Commands: ess-spec, compare, finite-section, torus-lab, hvz,
//! landstad-check. Configs are TOML with a versioned schema field;
//! reports are JSON with a fixed key order and floats printed with 17
//! significant digits (lossless double round-trip), so identical configs
//! produce byte-identical output except for the timestamp field. Files
//! are written atomically (temp file + rename).

use crate::band_core::{Assignment, BumpProfile, Schedule, Warp};
use crate::localization::{LocalizeConfig, LocalizeError};
use crate::models::{
    self, assemble, finite_section_oracle, hvz_full_separable_spectrum, klaus_spectrum,
    warp_invariance, FilterConfig, Hopping, ModelError, ModelSpec, OracleReport,
};
use crate::spectral_sets::SpectralSet;
use crate::torus_lab::{
    average_over_characters, balanced_gaussian_vector, compactness_defect, dual_gaussian,
    fourier_inversion, landstad_profile, rank_one_projector, weyl_residual, CyclicGroupOperator,
};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const CONFIG_SCHEMA: &str = "specx-config-v1";
pub const REPORT_SCHEMA: &str = "specx-report-v1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io error on {path}: {err}")]
    Io { path: String, err: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_)
            | CliError::UnknownId(_)
            | CliError::ConstraintViolation(_)
            | CliError::Usage(_)
            | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Model(m) => match m {
                ModelError::InfeasibleSize(_) => EXIT_INFEASIBLE,
                ModelError::InvalidSpec(_) | ModelError::UnsupportedLattice(_) => EXIT_CONFIG,
                ModelError::Band(crate::band_core::BandError::InfeasibleSize(_)) => EXIT_INFEASIBLE,
                ModelError::Localize(LocalizeError::ClassUnsupported(_)) => EXIT_CONFIG,
                _ => EXIT_NOT_CONVERGED,
            },
        }
    }
}

// ---------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: String,
    model: RawModel,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    localization: RawLocalization,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    #[serde(default)]
    hopping: Option<Vec<(i64, f64)>>,
    #[serde(default)]
    sites: Option<Vec<(i64, f64)>>,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    cluster_samples: Option<usize>,
    #[serde(default)]
    schedule: Option<String>,
    #[serde(default)]
    centers: Option<Vec<i64>>,
    #[serde(default)]
    bumps: Option<Vec<RawBump>>,
    #[serde(default)]
    assignment_prefix: Option<Vec<usize>>,
    #[serde(default)]
    assignment_cycle: Option<Vec<usize>>,
    #[serde(default)]
    table: Option<Vec<f64>>,
    #[serde(default)]
    warp: Option<String>,
    #[serde(default)]
    weights: Option<(f64, f64)>,
    #[serde(default)]
    potential_x0: Option<Vec<(i64, f64)>>,
    #[serde(default)]
    potential_x1: Option<Vec<(i64, f64)>>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct RawBump {
    offsets: Vec<i64>,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    merge_gap: Option<f64>,
    two_body_tol: Option<f64>,
    limit_tol: Option<f64>,
    compare_tol: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLocalization {
    window: Option<usize>,
    laurent_resolution: Option<usize>,
    bloch_k_samples: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    sizes: Option<Vec<usize>>,
    outer_fraction: Option<f64>,
    mass_threshold: Option<f64>,
    cell_width: Option<f64>,
    isolation_factor: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    json: Option<String>,
    csv: Option<String>,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub merge_gap: Option<f64>,
    pub two_body_tol: f64,
    pub limit_tol: f64,
    pub compare_tol: f64,
    pub localize: LocalizeConfig,
    pub oracle_sizes: Vec<usize>,
    pub filter: FilterConfig,
    pub out_json: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if raw.schema != CONFIG_SCHEMA {
        return Err(CliError::ConstraintViolation(format!(
            "schema must be {CONFIG_SCHEMA}, got {}",
            raw.schema
        )));
    }
    let hopping = Hopping {
        terms: raw.model.hopping.clone().unwrap_or_else(|| vec![(1, 1.0)]),
    };
    let model = match raw.model.kind.as_str() {
        "free" => ModelSpec::TwoBody {
            hopping,
            sites: Vec::new(),
        },
        "two-body" => ModelSpec::TwoBody {
            hopping,
            sites: raw.model.sites.clone().unwrap_or_default(),
        },
        "slowly-oscillating" => ModelSpec::SlowlyOscillating {
            hopping,
            amplitude: raw.model.amplitude.unwrap_or(1.0),
            cluster_samples: raw.model.cluster_samples.unwrap_or(21),
        },
        "sparse-klaus" => {
            let schedule = match raw.model.schedule.as_deref().unwrap_or("squares") {
                "squares" => Schedule::Squares,
                "powers2" => Schedule::PowersOfTwo,
                "explicit" => {
                    Schedule::Explicit(Arc::new(raw.model.centers.clone().ok_or_else(|| {
                        CliError::ConstraintViolation("explicit schedule requires centers".into())
                    })?))
                }
                other => return Err(CliError::UnknownId(format!("schedule \"{other}\""))),
            };
            let bumps: Vec<BumpProfile> = raw
                .model
                .bumps
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|b| {
                    if b.offsets.len() != b.values.len() {
                        return Err(CliError::ConstraintViolation(
                            "bump offsets and values must have equal length".into(),
                        ));
                    }
                    Ok(BumpProfile {
                        values: b.offsets.into_iter().zip(b.values).collect(),
                    })
                })
                .collect::<Result<_, _>>()?;
            if bumps.is_empty() {
                return Err(CliError::ConstraintViolation(
                    "sparse model requires at least one bump".into(),
                ));
            }
            let assignment = Assignment {
                prefix: raw.model.assignment_prefix.clone().unwrap_or_default(),
                cycle: raw
                    .model
                    .assignment_cycle
                    .clone()
                    .unwrap_or_else(|| (0..bumps.len()).collect()),
            };
            ModelSpec::SparseKlaus {
                hopping,
                schedule,
                bumps,
                assignment,
            }
        }
        "warped-periodic" => {
            let warp = match raw.model.warp.as_deref().unwrap_or("identity") {
                "identity" => Warp::Identity,
                "sqrtshift" => Warp::SqrtShift,
                other => return Err(CliError::UnknownId(format!("warp \"{other}\""))),
            };
            ModelSpec::WarpedPeriodic {
                hopping,
                table: raw.model.table.clone().ok_or_else(|| {
                    CliError::ConstraintViolation("warped model requires a table".into())
                })?,
                warp,
            }
        }
        "hvz" => ModelSpec::Hvz {
            weights: raw.model.weights.unwrap_or((1.0, 1.0)),
            coordinate_potentials: [
                raw.model.potential_x0.clone().unwrap_or_default(),
                raw.model.potential_x1.clone().unwrap_or_default(),
            ],
        },
        other => return Err(CliError::UnknownId(format!("model kind \"{other}\""))),
    };

    let positive = |name: &str, v: f64| -> Result<f64, CliError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::ConstraintViolation(format!(
                "{name} must be positive, got {v}"
            )))
        }
    };
    let merge_gap = match raw.tolerances.merge_gap {
        None => None,
        Some(v) if v == 0.0 => None,
        Some(v) => Some(positive("merge_gap", v)?),
    };
    let two_body_tol = positive("two_body_tol", raw.tolerances.two_body_tol.unwrap_or(1e-3))?;
    let limit_tol = positive("limit_tol", raw.tolerances.limit_tol.unwrap_or(1e-8))?;
    let compare_tol = positive("compare_tol", raw.tolerances.compare_tol.unwrap_or(0.05))?;

    let mut localize = model.localize_config();
    localize.two_body_edge_tol = two_body_tol;
    localize.limit_tol = limit_tol;
    if let Some(w) = raw.localization.window {
        if w == 0 || w > 32 {
            return Err(CliError::ConstraintViolation(
                "localization window must be in 1..=32".into(),
            ));
        }
        localize.window = w;
    }
    if let Some(r) = raw.localization.laurent_resolution {
        if r < 16 {
            return Err(CliError::ConstraintViolation(
                "laurent_resolution must be at least 16".into(),
            ));
        }
        localize.laurent_resolution = r;
    }
    if let Some(k) = raw.localization.bloch_k_samples {
        if k < 4 {
            return Err(CliError::ConstraintViolation(
                "bloch_k_samples must be at least 4".into(),
            ));
        }
        localize.bloch_k_samples = k;
    }

    let oracle_sizes = raw.oracle.sizes.unwrap_or_else(|| vec![512, 2048]);
    if oracle_sizes.is_empty() {
        return Err(CliError::ConstraintViolation(
            "oracle sizes must be nonempty".into(),
        ));
    }
    if oracle_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::ConstraintViolation(
            "oracle sizes must be strictly increasing".into(),
        ));
    }
    let mut filter = FilterConfig::default();
    if let Some(v) = raw.oracle.outer_fraction {
        if !(0.0..1.0).contains(&v) {
            return Err(CliError::ConstraintViolation(
                "outer_fraction must be in [0, 1)".into(),
            ));
        }
        filter.outer_fraction = v;
    }
    if let Some(v) = raw.oracle.mass_threshold {
        filter.mass_threshold = positive("mass_threshold", v)?;
    }
    if let Some(v) = raw.oracle.cell_width {
        filter.cell_width = positive("cell_width", v)?;
    }
    if let Some(v) = raw.oracle.isolation_factor {
        filter.isolation_factor = positive("isolation_factor", v)?;
    }
    filter.merge_gap = merge_gap;
    Ok(RunConfig {
        model,
        merge_gap,
        two_body_tol,
        limit_tol,
        compare_tol,
        localize,
        oracle_sizes,
        filter,
        out_json: raw.output.json.map(PathBuf::from),
        out_csv: raw.output.csv.map(PathBuf::from),
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        err: e.to_string(),
    })?;
    parse_config(&text)
}

// ---------------------------------------------------------------------
// JSON with 17-significant-digit floats and fixed key order
// ---------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(&'static str, Json)>),
}

impl Json {
    pub fn render(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Json::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Json::Num(v) => {
                // 17 significant digits: lossless f64 round trip
                let _ = write!(out, "{v:.16e}");
            }
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.render(out);
                }
                out.push(']');
            }
            Json::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "\"{k}\":");
                    v.render(out);
                }
                out.push('}');
            }
        }
    }

    pub fn to_string_rendered(&self) -> String {
        let mut s = String::new();
        self.render(&mut s);
        s.push('\n');
        s
    }
}

pub fn spectral_set_json(s: &SpectralSet) -> Json {
    Json::Obj(vec![
        (
            "intervals",
            Json::Arr(
                s.intervals()
                    .iter()
                    .map(|&(a, b)| Json::Arr(vec![Json::Num(a), Json::Num(b)]))
                    .collect(),
            ),
        ),
        (
            "points",
            Json::Arr(s.points().iter().map(|&p| Json::Num(p)).collect()),
        ),
    ])
}

fn timestamp_ms() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

fn report_root(command: &str, body: Vec<(&'static str, Json)>) -> Json {
    let mut fields = vec![
        ("schema", Json::Str(REPORT_SCHEMA.into())),
        ("command", Json::Str(command.into())),
        ("generated_unix_ms", Json::Int(timestamp_ms())),
    ];
    fields.extend(body);
    Json::Obj(fields)
}

/// temp file + rename so readers never observe partial output
fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let io_err = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        err: e.to_string(),
    };
    std::fs::write(&tmp, content).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

fn oracle_csv(report: &OracleReport) -> String {
    let mut s = String::from("kind,value,value2\n");
    for v in &report.retained_samples {
        let _ = writeln!(s, "eigenvalue,{v:.16e},");
    }
    for v in &report.removed {
        let _ = writeln!(s, "removed,{v:.16e},");
    }
    for &(a, b) in report.set.intervals() {
        let _ = writeln!(s, "interval,{a:.16e},{b:.16e}");
    }
    for &p in report.set.points() {
        let _ = writeln!(s, "point,{p:.16e},");
    }
    s
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

fn model_summary_json(spec: &ModelSpec) -> Json {
    let mut fields = vec![("kind", Json::Str(spec.kind().into()))];
    match spec {
        ModelSpec::TwoBody { hopping, sites } => {
            fields.push(("hopping", hopping_json(hopping)));
            fields.push((
                "sites",
                Json::Arr(
                    sites
                        .iter()
                        .map(|&(p, v)| Json::Arr(vec![Json::Int(p), Json::Num(v)]))
                        .collect(),
                ),
            ));
        }
        ModelSpec::SlowlyOscillating {
            hopping,
            amplitude,
            cluster_samples,
        } => {
            fields.push(("hopping", hopping_json(hopping)));
            fields.push(("amplitude", Json::Num(*amplitude)));
            fields.push(("cluster_samples", Json::Int(*cluster_samples as i64)));
        }
        ModelSpec::SparseKlaus {
            hopping,
            schedule,
            bumps,
            assignment,
        } => {
            fields.push(("hopping", hopping_json(hopping)));
            fields.push(("schedule", Json::Str(schedule.id().into())));
            fields.push(("bump_types", Json::Int(bumps.len() as i64)));
            fields.push((
                "assignment_cycle",
                Json::Arr(
                    assignment
                        .cycle
                        .iter()
                        .map(|&t| Json::Int(t as i64))
                        .collect(),
                ),
            ));
        }
        ModelSpec::WarpedPeriodic {
            hopping,
            table,
            warp,
        } => {
            fields.push(("hopping", hopping_json(hopping)));
            fields.push((
                "table",
                Json::Arr(table.iter().map(|&v| Json::Num(v)).collect()),
            ));
            fields.push(("warp", Json::Str(warp.id().into())));
        }
        ModelSpec::Hvz {
            weights,
            coordinate_potentials,
        } => {
            fields.push((
                "weights",
                Json::Arr(vec![Json::Num(weights.0), Json::Num(weights.1)]),
            ));
            for (name, sites) in [
                ("potential_x0", &coordinate_potentials[0]),
                ("potential_x1", &coordinate_potentials[1]),
            ] {
                fields.push((
                    name,
                    Json::Arr(
                        sites
                            .iter()
                            .map(|&(p, v)| Json::Arr(vec![Json::Int(p), Json::Num(v)]))
                            .collect(),
                    ),
                ));
            }
        }
    }
    Json::Obj(fields)
}

fn hopping_json(h: &Hopping) -> Json {
    Json::Arr(
        h.terms
            .iter()
            .map(|&(a, w)| Json::Arr(vec![Json::Int(a), Json::Num(w)]))
            .collect(),
    )
}

fn localization_rows_json(ess: &crate::localization::EssentialSpectrum) -> Json {
    Json::Arr(
        ess.rows
            .iter()
            .map(|row| {
                Json::Obj(vec![
                    ("direction", Json::Str(row.direction.describe())),
                    ("class", Json::Str(row.class.name().into())),
                    ("spectrum", spectral_set_json(&row.spectrum)),
                    (
                        "certificate",
                        Json::Obj(vec![
                            ("window", Json::Int(row.certificate.window as i64)),
                            ("radius", Json::Int(row.certificate.radius)),
                            ("residual", Json::Num(row.certificate.residual)),
                        ]),
                    ),
                    ("redundant", Json::Bool(row.redundant)),
                ])
            })
            .collect(),
    )
}

pub struct CommandOutput {
    pub json: Json,
    pub csv: Option<String>,
    pub summary: String,
}

pub fn cmd_ess_spec(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let assembled = assemble(&cfg.model)?;
    let mut body = vec![
        ("model", model_summary_json(&cfg.model)),
        ("essential_spectrum", spectral_set_json(&assembled.set)),
    ];
    if let Some(ess) = &assembled.localization {
        body.push(("directions", localization_rows_json(ess)));
    }
    if let ModelSpec::SparseKlaus { .. } = &cfg.model {
        let k = klaus_spectrum(&cfg.model)?;
        body.push(("klaus_formula", spectral_set_json(&k)));
    }
    if let ModelSpec::WarpedPeriodic { .. } = &cfg.model {
        let w = warp_invariance(&cfg.model)?;
        body.push(("unwarped_bloch", spectral_set_json(&w.unwarped_bloch)));
        body.push(("warp_invariance_distance", Json::Num(w.distance)));
    }
    let summary = format!(
        "essential spectrum: {} interval(s), {} point(s)",
        assembled.set.intervals().len(),
        assembled.set.points().len()
    );
    Ok(CommandOutput {
        json: report_root("ess-spec", body),
        csv: None,
        summary,
    })
}

fn oracle_json(r: &OracleReport, reference: &SpectralSet) -> Json {
    let hausdorff = r.hausdorff_to(reference);
    let to_ref = r.one_sided_to(reference);
    let from_ref = r.one_sided_from(reference);
    let opt = |v: Option<f64>| v.map_or(Json::Null, Json::Num);
    Json::Obj(vec![
        ("n", Json::Int(r.n as i64)),
        ("total_eigenvalues", Json::Int(r.total_eigenvalues as i64)),
        ("retained", Json::Int(r.retained_count as i64)),
        ("boundary_removed", Json::Int(r.boundary_removed as i64)),
        ("cloud", spectral_set_json(&r.set)),
        ("hausdorff", opt(hausdorff)),
        ("oracle_to_reference", opt(to_ref)),
        ("reference_to_oracle", opt(from_ref)),
    ])
}

/// What the finite-section cloud should approach: for the two-body class
/// the truncations see the whole spectrum including the discrete
/// eigenvalues, so the reference is the full two-body set; the other
/// classes compare against the assembled essential spectrum.
fn compare_reference(
    model: &ModelSpec,
    assembled: &SpectralSet,
) -> Result<(SpectralSet, &'static str), CliError> {
    match model {
        ModelSpec::TwoBody { .. } => {
            let op = model.build()?;
            let full = crate::limit_solvers::two_body_spectrum_detailed(&op, 1e-3)
                .map_err(ModelError::from)?;
            Ok((full.set, "full-spectrum"))
        }
        _ => Ok((assembled.clone(), "essential-spectrum")),
    }
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let assembled = assemble(&cfg.model)?;
    let (reference, reference_kind) = compare_reference(&cfg.model, &assembled.set)?;
    let op = cfg.model.build()?;
    let reports = crate::parallel::parallel_map(cfg.oracle_sizes.len(), |i| {
        finite_section_oracle(&op, cfg.oracle_sizes[i], &cfg.filter)
    });
    let mut oracle_rows = Vec::new();
    let mut last: Option<OracleReport> = None;
    for r in reports {
        let r = r?;
        oracle_rows.push(oracle_json(&r, &reference));
        last = Some(r);
    }
    let final_report = last.expect("at least one oracle size");
    let final_hausdorff = final_report
        .hausdorff_to(&reference)
        .unwrap_or(f64::INFINITY);
    let pass = final_hausdorff <= cfg.compare_tol;
    let mut body = vec![
        ("model", model_summary_json(&cfg.model)),
        ("assembled", spectral_set_json(&assembled.set)),
        ("reference", spectral_set_json(&reference)),
        ("reference_kind", Json::Str(reference_kind.into())),
        ("oracle", Json::Arr(oracle_rows)),
        ("declared_tolerance", Json::Num(cfg.compare_tol)),
        ("final_hausdorff", Json::Num(final_hausdorff)),
        ("pass", Json::Bool(pass)),
    ];
    if let Some(ess) = &assembled.localization {
        body.push(("directions", localization_rows_json(ess)));
    }
    if let ModelSpec::Hvz { .. } = &cfg.model {
        let full = hvz_full_separable_spectrum(&cfg.model)?;
        let d = final_report.hausdorff_to(&full);
        body.push(("full_separable_spectrum", spectral_set_json(&full)));
        body.push(("final_hausdorff_to_full", d.map_or(Json::Null, Json::Num)));
    }
    let summary = format!(
        "compare: final Hausdorff {final_hausdorff:.3e} vs tolerance {:.3e} => {}",
        cfg.compare_tol,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(CommandOutput {
        json: report_root("compare", body),
        csv: Some(oracle_csv(&final_report)),
        summary,
    })
}

pub fn cmd_finite_section(cfg: &RunConfig, n: Option<usize>) -> Result<CommandOutput, CliError> {
    let op = cfg.model.build()?;
    let n = n.unwrap_or_else(|| *cfg.oracle_sizes.last().unwrap());
    let r = finite_section_oracle(&op, n, &cfg.filter)?;
    let assembled = assemble(&cfg.model)?;
    let (reference, reference_kind) = compare_reference(&cfg.model, &assembled.set)?;
    let body = vec![
        ("model", model_summary_json(&cfg.model)),
        ("assembled", spectral_set_json(&assembled.set)),
        ("reference_kind", Json::Str(reference_kind.into())),
        ("oracle", oracle_json(&r, &reference)),
    ];
    let summary = format!(
        "finite section n={n}: {} retained, {} boundary states removed",
        r.retained_count, r.boundary_removed
    );
    Ok(CommandOutput {
        json: report_root("finite-section", body),
        csv: Some(oracle_csv(&r)),
        summary,
    })
}

pub fn cmd_hvz(cfg: &RunConfig, n: Option<usize>) -> Result<CommandOutput, CliError> {
    if !matches!(cfg.model, ModelSpec::Hvz { .. }) {
        return Err(CliError::ConstraintViolation(
            "hvz command requires an hvz model".into(),
        ));
    }
    let set = models::hvz_spectrum(&cfg.model)?;
    let full = hvz_full_separable_spectrum(&cfg.model)?;
    let op = cfg.model.build()?;
    let n = n.unwrap_or(60);
    let r = finite_section_oracle(&op, n, &cfg.filter)?;
    let body = vec![
        ("model", model_summary_json(&cfg.model)),
        ("essential_spectrum", spectral_set_json(&set)),
        ("full_separable_spectrum", spectral_set_json(&full)),
        ("oracle", oracle_json(&r, &set)),
        (
            "oracle_to_full",
            r.hausdorff_to(&full).map_or(Json::Null, Json::Num),
        ),
    ];
    let summary = format!(
        "hvz: essential spectrum has {} interval(s); oracle at {n}x{n} retained {}",
        set.intervals().len(),
        r.retained_count
    );
    Ok(CommandOutput {
        json: report_root("hvz", body),
        csv: Some(oracle_csv(&r)),
        summary,
    })
}

pub fn cmd_torus_lab(m: usize) -> Result<CommandOutput, CliError> {
    if m < 4 {
        return Err(CliError::ConstraintViolation(
            "group order must be at least 4".into(),
        ));
    }
    let mut state = 0xC0FFEEu64 ^ m as u64;
    let mut rnd = move || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    };
    let t = CyclicGroupOperator::from_fn(m, |_, _| num_complex::Complex64::new(rnd(), rnd()));
    let avg_err = average_over_characters(&t)
        .sub(&t.diagonal_part())
        .max_abs();
    let inv_err = fourier_inversion(&t).sub(&t).max_abs();
    let weyl = weyl_residual(m);
    let body = vec![
        ("group_order", Json::Int(m as i64)),
        ("averaging_error", Json::Num(avg_err)),
        ("inversion_error", Json::Num(inv_err)),
        ("weyl_residual", Json::Num(weyl)),
    ];
    let summary = format!(
        "torus lab Z_{m}: averaging {avg_err:.2e}, inversion {inv_err:.2e}, weyl {weyl:.2e}"
    );
    Ok(CommandOutput {
        json: report_root("torus-lab", body),
        csv: None,
        summary,
    })
}

pub fn cmd_landstad_check(m: usize) -> Result<CommandOutput, CliError> {
    if m < 8 {
        return Err(CliError::ConstraintViolation(
            "group order must be at least 8".into(),
        ));
    }
    let phi: Vec<f64> = (0..m)
        .map(|x| 2.0 + (std::f64::consts::TAU * x as f64 / m as f64).cos())
        .collect();
    let psi = dual_gaussian(m, m as f64 / 8.0);
    let t = CyclicGroupOperator::position_multiplier(m, &phi)
        .mul(&CyclicGroupOperator::momentum_multiplier(m, &psi));
    let (comm, shifts) = landstad_profile(&t);

    let proj = rank_one_projector(&balanced_gaussian_vector(m));
    let d_proj = compactness_defect(&proj);
    let d_shift = compactness_defect(&CyclicGroupOperator::shift(m, 1));

    let body = vec![
        ("group_order", Json::Int(m as i64)),
        (
            "commutator_profile",
            Json::Arr(comm.iter().map(|&v| Json::Num(v)).collect()),
        ),
        (
            "shift_profile",
            Json::Arr(shifts.iter().map(|&v| Json::Num(v)).collect()),
        ),
        (
            "rank_one_defect",
            Json::Obj(vec![
                ("shift_term", Json::Num(d_proj.shift_term)),
                ("modulation_term", Json::Num(d_proj.modulation_term)),
                ("position_tail", Json::Num(d_proj.position_tail)),
                ("momentum_tail", Json::Num(d_proj.momentum_tail)),
                ("defect", Json::Num(d_proj.defect)),
            ]),
        ),
        (
            "shift_defect",
            Json::Obj(vec![
                ("position_tail", Json::Num(d_shift.position_tail)),
                ("defect", Json::Num(d_shift.defect)),
            ]),
        ),
    ];
    let summary = format!(
        "landstad Z_{m}: smallest-argument commutator {:.4e}, rank-1 defect {:.4}, shift tail {:.4}",
        comm.get(1).copied().unwrap_or(0.0),
        d_proj.defect,
        d_shift.position_tail
    );
    Ok(CommandOutput {
        json: report_root("landstad-check", body),
        csv: None,
        summary,
    })
}

// ---------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------

struct ParsedArgs {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    size: Option<usize>,
    want_json: bool,
    want_csv: bool,
}

fn parse_args(args: &[String]) -> Result<ParsedArgs, CliError> {
    let mut it = args.iter();
    let command = it
        .next()
        .ok_or_else(|| CliError::Usage(USAGE.trim().into()))?
        .clone();
    let mut parsed = ParsedArgs {
        command,
        config: None,
        out: None,
        size: None,
        want_json: false,
        want_csv: false,
    };
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
                parsed.config = Some(PathBuf::from(v));
            }
            "--out" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage("--out needs a path".into()))?;
                parsed.out = Some(PathBuf::from(v));
            }
            "--size" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage("--size needs a value".into()))?;
                parsed.size = Some(
                    v.parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("bad --size value {v}")))?,
                );
            }
            "--json" => parsed.want_json = true,
            "--csv" => parsed.want_csv = true,
            other => return Err(CliError::Usage(format!("unknown flag {other}"))),
        }
    }
    Ok(parsed)
}

const USAGE: &str = "
usage: specx <command> [flags]

commands:
  ess-spec        --config PATH [--out PATH] [--json|--csv]
  compare         --config PATH [--out PATH] [--json|--csv]
  finite-section  --config PATH [--size N] [--out PATH] [--json|--csv]
  hvz             --config PATH [--size N] [--out PATH] [--json|--csv]
  torus-lab       [--size M] [--out PATH]
  landstad-check  [--size M] [--out PATH]

exit codes: 0 success, 2 not converged, 3 infeasible size, 4 config error
";

/// Prints without panicking when stdout is a closed pipe (e.g. | head).
fn say(msg: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{msg}");
}

fn run_inner(args: &[String]) -> Result<(), CliError> {
    let parsed = parse_args(args)?;
    let mut cfg_cache: Option<RunConfig> = None;
    if let Some(path) = &parsed.config {
        cfg_cache = Some(load_config(path)?);
    }
    let need_config = |cfg: &Option<RunConfig>| -> Result<RunConfig, CliError> {
        cfg.clone()
            .ok_or_else(|| CliError::Usage("this command requires --config".into()))
    };
    let output = match parsed.command.as_str() {
        "ess-spec" => cmd_ess_spec(&need_config(&cfg_cache)?)?,
        "compare" => cmd_compare(&need_config(&cfg_cache)?)?,
        "finite-section" => cmd_finite_section(&need_config(&cfg_cache)?, parsed.size)?,
        "hvz" => cmd_hvz(&need_config(&cfg_cache)?, parsed.size)?,
        "torus-lab" => cmd_torus_lab(parsed.size.unwrap_or(16))?,
        "landstad-check" => cmd_landstad_check(parsed.size.unwrap_or(64))?,
        other => return Err(CliError::Usage(format!("unknown command {other}\n{USAGE}"))),
    };

    say(&output.summary);
    let json_path = parsed
        .out
        .clone()
        .filter(|_| !parsed.want_csv || parsed.want_json)
        .or_else(|| cfg_cache.as_ref().and_then(|c| c.out_json.clone()));
    if let Some(path) = json_path {
        write_atomic(&path, &output.json.to_string_rendered())?;
        say(&format!("wrote {}", path.display()));
    }
    let csv_path = parsed
        .out
        .clone()
        .filter(|_| parsed.want_csv)
        .or_else(|| cfg_cache.as_ref().and_then(|c| c.out_csv.clone()));
    if let (Some(path), Some(csv)) = (csv_path, &output.csv) {
        write_atomic(&path, csv)?;
        say(&format!("wrote {}", path.display()));
    }
    Ok(())
}

pub fn run(args: &[String]) -> i32 {
    match run_inner(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    run(&args)
}
