//! Batch front end: experiment configs, the six commands and their
//! CSV/JSON artifacts.
//!
//! Every command is an ordinary function returning a report so that it can
//! be driven from tests as well as from the binary. Artifacts are written
//! atomically (temporary file, then rename) and are byte-for-byte
//! reproducible for a given config.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    bound_check, estimate_radius_with, exponent_fit, low_order_bounds, majorant,
    majorant_lemma_check, radius_trend, BoundReport, ExponentEntry, LemmaReport, RadiusEstimate,
    RadiusMethod, RadiusTrend,
};
use crate::error::Error;
use crate::force::ForceSpec;
use crate::ode::{integrate, OdeSolution, Tolerances};
use crate::ring::RingConfig;
use crate::series::{
    compute_coefficients, evaluate_velocity, explicit_c3, fmt_float, oracle_coefficients,
    CoefficientTable, ORACLE_MAX_ORDER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;
pub const EXIT_COLLISION: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

/// Largest `t_end / R̂` accepted by `compare`.
pub const COMPARE_MAX_FRACTION: f64 = 0.5;
/// `t_end / R̂` used by `compare` and `simulate` when `ode.t_end` is absent.
pub const COMPARE_DEFAULT_FRACTION: f64 = 0.2;
/// Relative tolerance for the closed-form and enumeration checks in `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-10;
pub const VERIFY_ORACLE_N: [usize; 3] = [3, 4, 8];
pub const VERIFY_MAJORANT_A: f64 = 2.0;
pub const VERIFY_LEMMA_ORDER: usize = 30;
pub const VERIFY_SERIES_ORDER: usize = 60;

/// A failed command: process exit code plus a one-line message.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_OTHER,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Diagnostics are single-line.
        f.write_str(&self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Config(_) => EXIT_CONFIG,
            Error::Overflow(_) => EXIT_OVERFLOW,
            Error::Collision { .. } => EXIT_COLLISION,
            Error::Stiffness { .. } => EXIT_OTHER,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `ring.N`: a single size or a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    One(usize),
    Grid(Vec<usize>),
}

impl SizeSpec {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            SizeSpec::One(n) => vec![*n],
            SizeSpec::Grid(ns) => ns.clone(),
        }
    }
}

/// `ring.scale`: `"auto"` for `N^(-5/6)`, or an explicit positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalePolicy {
    Auto,
    Fixed(f64),
}

impl Serialize for ScalePolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ScalePolicy::Auto => s.serialize_str("auto"),
            ScalePolicy::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ScalePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(ScalePolicy::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(ScalePolicy::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or a number, got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    #[serde(rename = "N")]
    pub n: SizeSpec,
    /// Must equal `force.L` when given.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(rename = "J_max")]
    pub j_max: usize,
    #[serde(default = "auto_scale")]
    pub scale: ScalePolicy,
}

fn auto_scale() -> ScalePolicy {
    ScalePolicy::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSection {
    pub t_end: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_count: usize,
}

impl Default for OdeSection {
    fn default() -> Self {
        Self {
            t_end: None,
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            sample_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub tail_fraction: f64,
    /// Grid used by `radius`, `verify` and `sweep`; defaults to `ring.N`.
    pub n_grid: Option<Vec<usize>>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tail_fraction: 0.5,
            n_grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ring: RingSection,
    pub force: ForceSpec,
    #[serde(default)]
    pub ode: OdeSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    /// `N ∈ {16, …, 256}`, `L = 1`, `F = 0.5 sin(2πx)`, `J_max = 32`.
    fn default() -> Self {
        Self {
            ring: RingSection {
                n: SizeSpec::Grid(vec![16, 32, 64, 128, 256]),
                length: Some(1.0),
                j_max: 32,
                scale: ScalePolicy::Auto,
            },
            force: ForceSpec::sine(1.0, 1, 0.5).expect("valid default force"),
            ode: OdeSection::default(),
            analysis: AnalysisSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn check_grid(field: &str, ns: &[usize]) -> CliResult<()> {
    if ns.is_empty() {
        return Err(CliError::config(format!("{field} must not be empty")));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(CliError::config(format!("{field}: N = {n} is below 2")));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!(
            "{field} must be strictly increasing"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Errors name the offending field.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::config(format!("config: {inner}"))
            } else {
                CliError::config(format!("{path}: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        check_grid("ring.N", &self.ring.n.sizes())?;
        if let Some(grid) = &self.analysis.n_grid {
            check_grid("analysis.n_grid", grid)?;
        }
        if let Some(length) = self.ring.length {
            let period = self.force.period();
            if (length - period).abs() > 1e-12 * period {
                return Err(CliError::config(format!(
                    "ring.L = {length} does not match force.L = {period}"
                )));
            }
        }
        if self.ring.j_max < 1 {
            return Err(CliError::config("ring.J_max must be at least 1"));
        }
        if let ScalePolicy::Fixed(s) = self.ring.scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(CliError::config(format!(
                    "ring.scale must be \"auto\" or a positive number, got {s}"
                )));
            }
        }
        Tolerances::new(self.ode.rel_tol, self.ode.abs_tol)?;
        if let Some(t) = self.ode.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::config(format!(
                    "ode.t_end must be positive, got {t}"
                )));
            }
        }
        if self.ode.sample_count < 1 {
            return Err(CliError::config("ode.sample_count must be at least 1"));
        }
        let tail = self.analysis.tail_fraction;
        if !(tail > 0.0 && tail <= 1.0) {
            return Err(CliError::config(format!(
                "analysis.tail_fraction must lie in (0, 1], got {tail}"
            )));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::config("output.formats must not be empty"));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ring.n.sizes()
    }

    pub fn analysis_grid(&self) -> Vec<usize> {
        self.analysis.n_grid.clone().unwrap_or_else(|| self.sizes())
    }

    pub fn ring(&self, n: usize) -> CliResult<RingConfig> {
        let ring = match self.ring.scale {
            ScalePolicy::Auto => RingConfig::new(n, self.force.clone(), self.ring.j_max)?,
            ScalePolicy::Fixed(s) => {
                RingConfig::with_scale(n, self.force.clone(), self.ring.j_max, s)?
            }
        };
        Ok(ring)
    }

    pub fn tolerances(&self) -> CliResult<Tolerances> {
        Ok(Tolerances::new(self.ode.rel_tol, self.ode.abs_tol)?)
    }

    pub fn writes_csv(&self) -> bool {
        self.output
            .formats
            .iter()
            .any(|f| matches!(f, Format::Csv | Format::Both))
    }

    pub fn writes_json(&self) -> bool {
        self.output
            .formats
            .iter()
            .any(|f| matches!(f, Format::Json | Format::Both))
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn json_text(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable report");
    text.push('\n');
    text
}

/// The config as embedded in artifacts. The output section is left out so
/// that the same experiment gives identical files wherever it is written.
fn config_json(config: &ExperimentConfig) -> Value {
    let mut value = serde_json::to_value(config).expect("serialisable config");
    if let Some(map) = value.as_object_mut() {
        map.remove("output");
    }
    value
}

fn tables_for(
    config: &ExperimentConfig,
    sizes: &[usize],
) -> CliResult<Vec<(RingConfig, CoefficientTable)>> {
    sizes
        .par_iter()
        .map(|&n| {
            let ring = config.ring(n)?;
            let table = compute_coefficients(&ring)?;
            Ok((ring, table))
        })
        .collect()
}

fn radius_of(config: &ExperimentConfig, table: &CoefficientTable) -> CliResult<RadiusEstimate> {
    Ok(estimate_radius_with(
        table,
        RadiusMethod::RootTest,
        config.analysis.tail_fraction,
    )?)
}

/// Writes one coefficient table per `N` (`coeffs_N{N}.csv` / `.json`).
pub fn cmd_coeffs(config: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let dir = &config.output.directory;
    let mut written = Vec::new();
    for (ring, table) in tables_for(config, &config.sizes())? {
        let stem = format!("coeffs_N{}", ring.n());
        if config.writes_csv() {
            let path = dir.join(format!("{stem}.csv"));
            write_atomic(&path, &table.to_csv())?;
            written.push(path);
        }
        if config.writes_json() {
            let path = dir.join(format!("{stem}.json"));
            write_atomic(&path, &json_text(&table.to_json(&ring)))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn sample_times(t_end: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| {
            if k == count {
                t_end
            } else {
                t_end * k as f64 / count as f64
            }
        })
        .collect()
}

/// `ode.t_end`, or `COMPARE_DEFAULT_FRACTION · R̂`.
fn horizon(config: &ExperimentConfig, radius: &RadiusEstimate) -> CliResult<f64> {
    match config.ode.t_end {
        Some(t) => Ok(t),
        None if radius.degenerate => Err(CliError::config(format!(
            "ode.t_end is required: the series for N = {} has no finite radius estimate",
            radius.n
        ))),
        None => Ok(COMPARE_DEFAULT_FRACTION * radius.r_hat),
    }
}

/// Integrates each ring of the grid and writes `trajectory_N{N}.csv` (all
/// samples) and `trajectory_N{N}.json` (run summary).
pub fn cmd_simulate(config: &ExperimentConfig) -> CliResult<Vec<OdeSolution>> {
    let tol = config.tolerances()?;
    let dir = &config.output.directory;
    let mut solutions = Vec::new();
    for n in config.sizes() {
        let ring = config.ring(n)?;
        let t_end = match config.ode.t_end {
            Some(t) => t,
            None => {
                let table = compute_coefficients(&ring)?;
                horizon(config, &radius_of(config, &table)?)?
            }
        };
        let solution = integrate(
            &ring,
            t_end,
            tol,
            &sample_times(t_end, config.ode.sample_count),
        )?;
        let stem = format!("trajectory_N{n}");
        if config.writes_csv() {
            write_atomic(&dir.join(format!("{stem}.csv")), &solution.to_csv())?;
        }
        if config.writes_json() {
            let report = json!({
                "N": n,
                "config": config_json(config),
                "summary": solution.summary_json(),
            });
            write_atomic(&dir.join(format!("{stem}.json")), &json_text(&report))?;
        }
        solutions.push(solution);
    }
    Ok(solutions)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSample {
    pub t: f64,
    /// `max_i |v_series - v_ode| / max_i |v_ode|`
    pub rel_error: f64,
    /// `max_i |c_{i,J}| t^J / (1 - t/R̂)` for the highest non-vanishing
    /// retained order `J`, relative to `max_i |v_ode|`.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J_max")]
    pub j_max: usize,
    pub radius: RadiusEstimate,
    pub t_end: f64,
    pub samples: Vec<CompareSample>,
    pub max_rel_error: f64,
    pub max_tail_estimate: f64,
    pub ode_max_local_error: f64,
}

fn relative_gap(series: &[f64], reference: &[f64]) -> f64 {
    let diff = series
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let size = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if size > 0.0 {
        diff / size
    } else {
        diff
    }
}

fn tail_estimate(table: &CoefficientTable, radius: &RadiusEstimate, t: f64, size: f64) -> f64 {
    // Highest retained order that does not vanish identically.
    let Some((j, log_top)) = (1..=table.j_max())
        .rev()
        .find_map(|j| table.log_max_abs(j).map(|l| (j, l)))
    else {
        return 0.0;
    };
    let ratio = if radius.degenerate {
        0.0
    } else {
        t / radius.r_hat
    };
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    let term = (log_top + j as f64 * t.ln()).exp() / (1.0 - ratio);
    if size > 0.0 {
        term / size
    } else {
        term
    }
}

/// Compares the truncated series with the reference integrator at
/// `ode.sample_count` times in `(0, t_end]`, for every `N` of the grid.
pub fn cmd_compare(config: &ExperimentConfig) -> CliResult<Vec<CompareReport>> {
    let tol = config.tolerances()?;
    let dir = &config.output.directory;
    let mut reports = Vec::new();
    for n in config.sizes() {
        let ring = config.ring(n)?;
        let table = compute_coefficients(&ring)?;
        let radius = radius_of(config, &table)?;
        let t_end = horizon(config, &radius)?;
        if !radius.degenerate && t_end > COMPARE_MAX_FRACTION * radius.r_hat {
            return Err(CliError::config(format!(
                "ode.t_end = {t_end} exceeds {COMPARE_MAX_FRACTION} R̂ = {} for N = {n}",
                COMPARE_MAX_FRACTION * radius.r_hat
            )));
        }
        let times = sample_times(t_end, config.ode.sample_count);
        let solution = integrate(&ring, t_end, tol, &times)?;
        let samples: Vec<CompareSample> = times
            .iter()
            .zip(&solution.states[1..])
            .map(|(&t, state)| {
                let series = evaluate_velocity(&table, t);
                let size = state.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                CompareSample {
                    t,
                    rel_error: relative_gap(series.values(), &state.v),
                    tail_estimate: tail_estimate(&table, &radius, t, size),
                }
            })
            .collect();
        let report = CompareReport {
            n,
            j_max: table.j_max(),
            t_end,
            max_rel_error: samples.iter().map(|s| s.rel_error).fold(0.0, f64::max),
            max_tail_estimate: samples.iter().map(|s| s.tail_estimate).fold(0.0, f64::max),
            ode_max_local_error: solution.max_local_error,
            radius,
            samples,
        };
        let stem = format!("compare_N{n}");
        if config.writes_csv() {
            let mut csv = String::from("t,rel_error,tail_estimate\n");
            for s in &report.samples {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_float(s.t),
                    fmt_float(s.rel_error),
                    fmt_float(s.tail_estimate)
                ));
            }
            write_atomic(&dir.join(format!("{stem}.csv")), &csv)?;
        }
        if config.writes_json() {
            let value = serde_json::to_value(&report).expect("serialisable report");
            write_atomic(&dir.join(format!("{stem}.json")), &json_text(&value))?;
        }
        reports.push(report);
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusReport {
    pub estimates: Vec<RadiusEstimate>,
    pub ratio_estimates: Vec<RadiusEstimate>,
    /// Absent for a single `N` or when any estimate is degenerate.
    pub trend: Option<RadiusTrend>,
}

fn radius_report(
    config: &ExperimentConfig,
    tables: &[CoefficientTable],
) -> CliResult<RadiusReport> {
    let tail = config.analysis.tail_fraction;
    let estimates = tables
        .iter()
        .map(|t| estimate_radius_with(t, RadiusMethod::RootTest, tail))
        .collect::<Result<Vec<_>, _>>()?;
    let ratio_estimates = tables
        .iter()
        .map(|t| estimate_radius_with(t, RadiusMethod::RatioTest, tail))
        .collect::<Result<Vec<_>, _>>()?;
    let trend = if estimates.len() >= 2 && estimates.iter().all(|e| !e.degenerate) {
        Some(radius_trend(&estimates)?)
    } else {
        None
    };
    Ok(RadiusReport {
        estimates,
        ratio_estimates,
        trend,
    })
}

fn radius_csv(report: &RadiusReport) -> String {
    let mut csv = String::from("N,method,r_hat,j_lo,j_hi,usable_orders,residual,degenerate\n");
    for e in report.estimates.iter().chain(&report.ratio_estimates) {
        let method = match e.method {
            RadiusMethod::RootTest => "root-test",
            RadiusMethod::RatioTest => "ratio-test",
        };
        csv.push_str(&format!(
            "{},{method},{},{},{},{},{},{}\n",
            e.n,
            fmt_float(e.r_hat),
            e.window[0],
            e.window[1],
            e.usable_orders,
            fmt_float(e.residual),
            e.degenerate
        ));
    }
    csv
}

/// Radius estimates over the analysis grid (`radius.json`, `radius.csv`).
pub fn cmd_radius(config: &ExperimentConfig) -> CliResult<RadiusReport> {
    let tables: Vec<CoefficientTable> = tables_for(config, &config.analysis_grid())?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let report = radius_report(config, &tables)?;
    let dir = &config.output.directory;
    if config.writes_csv() {
        write_atomic(&dir.join("radius.csv"), &radius_csv(&report))?;
    }
    if config.writes_json() {
        let value = json!({
            "config": config_json(config),
            "radius": report,
        });
        write_atomic(&dir.join("radius.json"), &json_text(&value))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    let size = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if size > 0.0 {
        diff / size
    } else {
        diff
    }
}

/// Runs every hard assertion and writes `verify.json`. Returns the report
/// even when a check fails; [`run`] maps that to exit code 5.
pub fn cmd_verify(config: &ExperimentConfig) -> CliResult<VerifyReport> {
    let c_f = config.force.c_f_bound();
    let mut checks = Vec::new();
    let tables = tables_for(config, &config.analysis_grid())?;

    if config.ring.j_max >= 4 {
        let bounds = tables
            .iter()
            .map(|(_, t)| low_order_bounds(t, c_f))
            .collect::<Result<Vec<_>, _>>()?;
        checks.push(Check {
            name: "low-order-bounds".into(),
            pass: bounds.iter().all(|b| b.holds),
            detail: json!(bounds),
        });
    }

    if config.ring.j_max >= 3 {
        let rows: Vec<Value> = tables
            .iter()
            .map(|(ring, table)| {
                let c3 = explicit_c3(ring).scaled(ring.scale().powi(3));
                let dev = max_relative_deviation(table.scaled_order(3).values(), c3.values());
                json!({"N": ring.n(), "max_rel_deviation": dev})
            })
            .collect();
        let pass = rows.iter().all(|r| {
            r["max_rel_deviation"]
                .as_f64()
                .is_some_and(|d| d <= VERIFY_TOLERANCE)
        });
        checks.push(Check {
            name: "third-order-closed-form".into(),
            pass,
            detail: json!(rows),
        });
    }

    let order = ORACLE_MAX_ORDER;
    let mut rows = Vec::new();
    for n in VERIFY_ORACLE_N {
        let ring = config.ring(n)?.with_j_max(order)?;
        let fast = compute_coefficients(&ring)?;
        let slow = oracle_coefficients(&ring, order)?;
        let worst = (1..=order)
            .map(|j| {
                max_relative_deviation(fast.scaled_order(j).values(), slow.scaled_order(j).values())
            })
            .fold(0.0, f64::max);
        rows.push(json!({"N": n, "orders": order, "max_rel_deviation": worst}));
    }
    checks.push(Check {
        name: "enumeration-oracle".into(),
        pass: rows.iter().all(|r| {
            r["max_rel_deviation"]
                .as_f64()
                .is_some_and(|d| d <= VERIFY_TOLERANCE)
        }),
        detail: json!(rows),
    });

    let lemma = majorant_lemma_check(VERIFY_MAJORANT_A, VERIFY_LEMMA_ORDER)?;
    checks.push(Check {
        name: "majorant-lemma".into(),
        pass: lemma.holds,
        detail: json!(lemma),
    });

    let series = majorant(VERIFY_MAJORANT_A, VERIFY_SERIES_ORDER)?;
    let exact = binomial_series(VERIFY_MAJORANT_A, VERIFY_SERIES_ORDER);
    let dev = series
        .coefficients
        .iter()
        .zip(&exact)
        .map(|(g, e)| (g - e).abs() / e.abs())
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "majorant-taylor-coefficients".into(),
        pass: dev <= 1e-12,
        detail: json!({"a": VERIFY_MAJORANT_A, "orders": VERIFY_SERIES_ORDER, "max_rel_deviation": dev}),
    });

    let report = VerifyReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    let value = json!({
        "config": config_json(config),
        "verify": report,
    });
    write_atomic(
        &config.output.directory.join("verify.json"),
        &json_text(&value),
    )?;
    Ok(report)
}

/// Taylor coefficients of `(1 - at)^(-1/2)` from the generalised binomial
/// series `(-1)^j binom(-1/2, j) a^j`, computed term by term.
fn binomial_series(a: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = 1.0f64;
    for j in 0..=order {
        if j > 0 {
            binom *= (-0.5 - (j as f64 - 1.0)) / j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * binom * a.powi(j as i32));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub radius: RadiusReport,
    pub exponents: Vec<ExponentEntry>,
    pub bounds: BoundReport,
    pub majorant: LemmaReport,
}

/// Full analysis over the analysis grid: radius trend, exponent fits for
/// every order, growth constants and the majorant check (`sweep.json`,
/// `sweep_exponents.csv`).
pub fn cmd_sweep(config: &ExperimentConfig) -> CliResult<SweepReport> {
    let tables: Vec<CoefficientTable> = tables_for(config, &config.analysis_grid())?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let radius = radius_report(config, &tables)?;
    let exponents = (1..=config.ring.j_max)
        .map(|j| exponent_fit(&tables, j))
        .collect::<Result<Vec<_>, _>>()?;
    let bounds = bound_check(&tables, config.force.c_f_bound())?;
    let majorant = majorant_lemma_check(VERIFY_MAJORANT_A, VERIFY_LEMMA_ORDER)?;
    let report = SweepReport {
        radius,
        exponents,
        bounds,
        majorant,
    };
    let dir = &config.output.directory;
    if config.writes_csv() {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        let mut csv = String::from("j,slope,half_width,prefactor,cap_part1,cap_part2,within_cap\n");
        for e in &report.exponents {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.j,
                opt(e.slope),
                opt(e.half_width),
                opt(e.prefactor),
                fmt_float(e.cap_part1),
                fmt_float(e.cap_part2),
                e.within_cap
            ));
        }
        write_atomic(&dir.join("sweep_exponents.csv"), &csv)?;
    }
    if config.writes_json() {
        let value = json!({
            "config": config_json(config),
            "sweep": report,
        });
        write_atomic(&dir.join("sweep.json"), &json_text(&value))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Coefficient tables, one per N.
    Coeffs,
    /// Reference trajectories, one per N.
    Simulate,
    /// Truncated series against the reference trajectory.
    Compare,
    /// Convergence-radius estimates and their trend in N.
    Radius,
    /// All hard checks; exits with 5 if any fails.
    Verify,
    /// Exponent fits, growth constants, radius trend and majorant check.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(
    name = "chain-taylor",
    version,
    about = "Taylor coefficients of a periodic inverse-square chain"
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON). Without it a built-in default is used.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides output.directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output formats; overrides output.formats.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Resolves the config for `args` and runs the command. Verification
/// failures come back as exit code 5.
pub fn run(args: &Args) -> CliResult<()> {
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError {
                code: EXIT_OTHER,
                message: format!("thread pool: {e}"),
            })?;
    }
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &args.out {
        config.output.directory = out.clone();
    }
    if let Some(format) = args.format {
        config.output.formats = vec![format];
    }

    match args.command {
        Command::Coeffs => cmd_coeffs(&config).map(drop),
        Command::Simulate => cmd_simulate(&config).map(drop),
        Command::Compare => cmd_compare(&config).map(drop),
        Command::Radius => cmd_radius(&config).map(drop),
        Command::Sweep => cmd_sweep(&config).map(drop),
        Command::Verify => {
            let report = cmd_verify(&config)?;
            if report.pass {
                Ok(())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(CliError {
                    code: EXIT_VERIFICATION,
                    message: format!("verification failed: {}", failed.join(", ")),
                })
            }
        }
    }
}
