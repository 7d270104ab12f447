//! CSV workflows behind the `ebmt` binary: ingestion, the balance-then-fit
//! pipeline, report rendering, and synthetic fixture files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::balance::{SolverConfig, WeightSolution};
use crate::data::{FeatureOptions, Sample, StandardizationTransform};
use crate::diagnostics::{balance_test, WEIGHTED_CAVEAT};
use crate::error::{Error, Result};
use crate::parametric::{bootstrap_ci, BootstrapConfig, Ebmt, LinearEffectModel, TreatmentScale};
use crate::rng::{stream, StreamTag};
use crate::simulation::{self, DataSpec, ScenarioReport, SplineSettings};
use crate::spline::{fit_spline, SplineConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inference {
    #[default]
    Wald,
    Bootstrap,
    Both,
}

impl Inference {
    pub fn wald(&self) -> bool {
        matches!(self, Inference::Wald | Inference::Both)
    }

    pub fn bootstrap(&self) -> bool {
        matches!(self, Inference::Bootstrap | Inference::Both)
    }
}

impl std::str::FromStr for Inference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wald" => Ok(Inference::Wald),
            "bootstrap" => Ok(Inference::Bootstrap),
            "both" => Ok(Inference::Both),
            other => Err(Error::InvalidConfig(format!("unknown inference `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Table,
    JsonLines,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(OutputFormat::Table),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub input: PathBuf,
    pub outcome: String,
    pub treatments: Vec<String>,
    pub covariates: Vec<String>,
    /// Outcome model; treatment names or `t1, t2, ...` may be used.
    pub model: Option<String>,
    pub spline: Option<SplineSettings>,
    pub inference: Inference,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub level: f64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Fit the outcome model on the original treatment units.
    pub original_units: bool,
    pub solver: SolverConfig,
    pub features: FeatureOptions,
}

impl AnalysisConfig {
    pub fn new(
        input: impl Into<PathBuf>,
        outcome: &str,
        treatments: &[&str],
        covariates: &[&str],
    ) -> Self {
        Self {
            input: input.into(),
            outcome: outcome.to_string(),
            treatments: treatments.iter().map(|s| s.to_string()).collect(),
            covariates: covariates.iter().map(|s| s.to_string()).collect(),
            model: None,
            spline: None,
            inference: Inference::Wald,
            bootstrap_b: 0,
            seed: 0,
            level: 0.95,
            output: None,
            format: OutputFormat::Table,
            original_units: false,
            solver: SolverConfig::default(),
            features: FeatureOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.treatments.is_empty() || self.covariates.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one treatment and one covariate are required".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in std::iter::once(&self.outcome)
            .chain(&self.treatments)
            .chain(&self.covariates)
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "column `{name}` is assigned more than one role"
                )));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        if self.inference.bootstrap() && self.bootstrap_b == 0 {
            return Err(Error::InvalidConfig(
                "bootstrap inference needs B > 0".into(),
            ));
        }
        Ok(())
    }

    fn used_columns(&self) -> Vec<&str> {
        std::iter::once(&self.outcome)
            .chain(&self.treatments)
            .chain(&self.covariates)
            .map(String::as_str)
            .collect()
    }
}

/// A sample read from CSV with its complete-case bookkeeping.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: Sample,
    pub rows_read: usize,
    pub dropped_rows: usize,
}

fn parse_cell(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let column = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("{} (expected {expected_len} fields)", len)
        }
        _ => "-".to_string(),
    };
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::ParseError {
            line,
            column,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads the used columns of a CSV file, dropping rows with any missing or
/// non-numeric value among them.
pub fn ingest_csv(path: &Path, config: &AnalysisConfig) -> Result<Ingested> {
    config.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            column: "-".into(),
            message: "missing header".into(),
        });
    }
    let index = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let columns = config
        .used_columns()
        .into_iter()
        .map(index)
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rows_read = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        rows_read += 1;
        let values: Option<Vec<f64>> = columns
            .iter()
            .map(|&c| record.get(c).and_then(parse_cell))
            .collect();
        if let Some(values) = values {
            rows.push(values);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    let n = rows.len();
    let p = config.treatments.len();
    let q = config.covariates.len();
    let y = DVector::from_fn(n, |i, _| rows[i][0]);
    let t = DMatrix::from_fn(n, p, |i, k| rows[i][1 + k]);
    let x = DMatrix::from_fn(n, q, |i, j| rows[i][1 + p + j]);
    Ok(Ingested {
        sample: Sample::new(y, t, x)?,
        rows_read,
        dropped_rows: rows_read - n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSection {
    pub input: String,
    pub outcome: String,
    pub treatments: Vec<String>,
    pub covariates: Vec<String>,
    pub rows_read: usize,
    pub dropped_rows: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSection {
    pub unweighted: f64,
    pub weighted: f64,
    pub degrees_of_freedom: usize,
    pub p_value_unweighted: f64,
    pub p_value_weighted: f64,
    pub caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub constraint_residual: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    pub effective_sample_size: f64,
}

impl SolverSection {
    fn from_solution(sol: &WeightSolution) -> Self {
        let w = &sol.weights;
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|v| v * v).sum();
        Self {
            converged: sol.converged,
            iterations: sol.iterations,
            objective: sol.objective,
            constraint_residual: sol.constraint_residual,
            min_weight: w.min(),
            max_weight: w.max(),
            effective_sample_size: sum * sum / sum_sq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub wald_lower: Option<f64>,
    pub wald_upper: Option<f64>,
    pub bootstrap_lower: Option<f64>,
    pub bootstrap_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSection {
    pub requested: usize,
    pub effective: usize,
    pub failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplinePoint {
    pub t: Vec<f64>,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSection {
    pub interior_knots: usize,
    pub order: usize,
    pub basis_size: usize,
    pub min_singular_value: f64,
    /// Fitted surface on a regular grid spanning the observed treatments.
    pub grid: Vec<SplinePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub data: DataSection,
    pub balance: BalanceSection,
    pub solver: SolverSection,
    pub scale: TreatmentScale,
    pub level: f64,
    pub model: Option<String>,
    pub coefficients: Vec<CoefficientRow>,
    pub bootstrap: Option<BootstrapSection>,
    pub transform: StandardizationTransform,
    pub spline: Option<SplineSection>,
}

fn grid_points(treatments: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let p = treatments.ncols();
    let per_dim = if p <= 2 { 11 } else { 5 };
    let axes: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            let col = treatments.column(k);
            let (lo, hi) = (col.min(), col.max());
            (0..per_dim)
                .map(|i| lo + (hi - lo) * i as f64 / (per_dim - 1) as f64)
                .collect()
        })
        .collect();
    let mut points = vec![vec![]];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    points
}

/// Ingest, standardize, balance, diagnose, fit, and attach inference.
///
/// With neither a model nor spline settings only the data, balance, and
/// solver sections are produced.
pub fn run_analysis(config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let ingested = ingest_csv(&config.input, config)?;
    let sample = &ingested.sample;
    let scale = if config.original_units {
        TreatmentScale::Original
    } else {
        TreatmentScale::Standardized
    };
    let model = match &config.model {
        Some(spec) => Some(LinearEffectModel::parse(
            spec,
            sample.p(),
            Some(&config.treatments),
        )?),
        None => None,
    };
    let ebmt = Ebmt {
        model: model
            .clone()
            .unwrap_or(LinearEffectModel::main_effects(sample.p())?),
        solver: config.solver,
        features: config.features,
        treatment_scale: scale,
    };
    let (solution, transform, standardized) = ebmt.weights(sample)?;
    let weights = solution.weights.as_slice();
    let before = balance_test(&standardized, None)?;
    let after = balance_test(&standardized, Some(weights))?;
    let target = match scale {
        TreatmentScale::Original => sample,
        TreatmentScale::Standardized => &standardized,
    };

    let mut coefficients = Vec::new();
    let mut bootstrap = None;
    if model.is_some() {
        let fit = ebmt.fit(sample, Some(config.level))?;
        let est = fit.estimate;
        let boot = if config.inference.bootstrap() {
            let cfg = BootstrapConfig::new(config.bootstrap_b, config.level, config.seed);
            let summary = bootstrap_ci(sample, &ebmt, &cfg)?;
            bootstrap = Some(BootstrapSection {
                requested: summary.requested,
                effective: summary.effective,
                failed: summary.failed,
                seed: config.seed,
            });
            Some(summary)
        } else {
            None
        };
        let labels: Vec<String> = ebmt
            .model
            .terms()
            .iter()
            .map(|t| t.label_with(&config.treatments))
            .collect();
        for (j, term) in labels.iter().enumerate() {
            let wald = config
                .inference
                .wald()
                .then(|| est.wald_ci.as_ref().map(|ci| ci[j]))
                .flatten();
            let b = boot.as_ref().map(|s| s.intervals[j]);
            coefficients.push(CoefficientRow {
                term: term.clone(),
                estimate: est.theta_hat[j],
                se: est.standard_errors.as_ref().map(|se| se[j]),
                wald_lower: wald.map(|i| i.lower),
                wald_upper: wald.map(|i| i.upper),
                bootstrap_lower: b.map(|i| i.lower),
                bootstrap_upper: b.map(|i| i.upper),
            });
        }
    }

    let spline = match config.spline {
        Some(settings) => {
            let spline_config = SplineConfig::new(settings.interior_knots, settings.order);
            let fit = fit_spline(target, weights, &spline_config)?;
            let grid = grid_points(target.treatments())
                .into_iter()
                .map(|t| {
                    let effect = fit.predict(&t)?;
                    Ok(SplinePoint { t, effect })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(SplineSection {
                interior_knots: settings.interior_knots,
                order: settings.order,
                basis_size: fit.basis.size(),
                min_singular_value: fit.min_singular_value,
                grid,
            })
        }
        None => None,
    };

    Ok(AnalysisReport {
        data: DataSection {
            input: config.input.display().to_string(),
            outcome: config.outcome.clone(),
            treatments: config.treatments.clone(),
            covariates: config.covariates.clone(),
            rows_read: ingested.rows_read,
            dropped_rows: ingested.dropped_rows,
            n: sample.n(),
        },
        balance: BalanceSection {
            unweighted: before.minus_two_log_lambda,
            weighted: after.minus_two_log_lambda,
            degrees_of_freedom: before.degrees_of_freedom,
            p_value_unweighted: before.p_value,
            p_value_weighted: after.p_value,
            caveat: WEIGHTED_CAVEAT.to_string(),
        },
        solver: SolverSection::from_solution(&solution),
        scale,
        level: config.level,
        model: model.map(|m| m.formula_with(&config.treatments)),
        coefficients,
        bootstrap,
        transform,
        spline,
    })
}

/// Formats a number with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// `0.95` as `95`, `0.975` as `97.5`.
fn fmt_percent(level: f64) -> String {
    let s = format!("{:.4}", level * 100.0);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_else(|| "-".to_string())
}

fn interval(lo: Option<f64>, hi: Option<f64>) -> String {
    match (lo, hi) {
        (Some(l), Some(h)) => format!("({}, {})", fmt_sig(l), fmt_sig(h)),
        _ => "-".to_string(),
    }
}

/// Human-readable report; every number is printed at six significant digits.
pub fn render_table(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let d = &report.data;
    let _ = writeln!(out, "Data");
    let _ = writeln!(out, "  input          {}", d.input);
    let _ = writeln!(out, "  outcome        {}", d.outcome);
    let _ = writeln!(out, "  treatments     {}", d.treatments.join(", "));
    let _ = writeln!(out, "  covariates     {}", d.covariates.join(", "));
    let _ = writeln!(out, "  rows read      {}", d.rows_read);
    let _ = writeln!(out, "  dropped rows   {}", d.dropped_rows);
    let _ = writeln!(out, "  n              {}", d.n);
    let _ = writeln!(out);

    let b = &report.balance;
    let _ = writeln!(
        out,
        "Balance (-2 log Lambda, df = {})",
        b.degrees_of_freedom
    );
    let _ = writeln!(out, "  {:<12}{:>14}{:>14}", "", "statistic", "p-value");
    let _ = writeln!(
        out,
        "  {:<12}{:>14}{:>14}",
        "Unweighted",
        fmt_sig(b.unweighted),
        fmt_sig(b.p_value_unweighted)
    );
    let _ = writeln!(
        out,
        "  {:<12}{:>14}{:>14}",
        "EBMT",
        fmt_sig(b.weighted),
        fmt_sig(b.p_value_weighted)
    );
    let _ = writeln!(out, "  note: {}", b.caveat);
    let _ = writeln!(out);

    let s = &report.solver;
    let _ = writeln!(out, "Solver");
    let _ = writeln!(out, "  converged             {}", s.converged);
    let _ = writeln!(out, "  iterations            {}", s.iterations);
    let _ = writeln!(out, "  dual objective        {}", fmt_sig(s.objective));
    let _ = writeln!(
        out,
        "  constraint residual   {}",
        fmt_sig(s.constraint_residual)
    );
    let _ = writeln!(
        out,
        "  weight range          [{}, {}]",
        fmt_sig(s.min_weight),
        fmt_sig(s.max_weight)
    );
    let _ = writeln!(
        out,
        "  effective sample size {}",
        fmt_sig(s.effective_sample_size)
    );

    if let Some(model) = &report.model {
        let pct = fmt_percent(report.level);
        let scale = match report.scale {
            TreatmentScale::Original => "original",
            TreatmentScale::Standardized => "standardized",
        };
        let _ = writeln!(out);
        let _ = writeln!(out, "Effect model {model} ({scale} treatment units)");
        let _ = writeln!(
            out,
            "  {:<12}{:>14}{:>14}  {:<28}{:<28}",
            "term",
            "Estimate",
            "SE",
            format!("{pct}% CI (Wald)"),
            format!("{pct}% CI (bootstrap)")
        );
        for row in &report.coefficients {
            let _ = writeln!(
                out,
                "  {:<12}{:>14}{:>14}  {:<28}{:<28}",
                row.term,
                fmt_sig(row.estimate),
                opt(row.se),
                interval(row.wald_lower, row.wald_upper),
                interval(row.bootstrap_lower, row.bootstrap_upper)
            );
        }
        if let Some(boot) = &report.bootstrap {
            let _ = writeln!(
                out,
                "  bootstrap: {} resamples requested, {} used, {} failed, seed {}",
                boot.requested, boot.effective, boot.failed, boot.seed
            );
        }
    }

    if let Some(sp) = &report.spline {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Spline surface (m = {}, r = {}, Q = {}, smallest singular value {})",
            sp.interior_knots,
            sp.order,
            sp.basis_size,
            fmt_sig(sp.min_singular_value)
        );
        let header: Vec<String> = report
            .data
            .treatments
            .iter()
            .map(|t| format!("{t:>14}"))
            .collect();
        let _ = writeln!(out, "  {}{:>14}", header.concat(), "effect");
        for point in &sp.grid {
            let cells: Vec<String> = point
                .t
                .iter()
                .map(|v| format!("{:>14}", fmt_sig(*v)))
                .collect();
            let _ = writeln!(out, "  {}{:>14}", cells.concat(), fmt_sig(point.effect));
        }
    }
    strip_trailing_spaces(&out)
}

fn strip_trailing_spaces(text: &str) -> String {
    text.lines().flat_map(|l| [l.trim_end(), "\n"]).collect()
}

#[derive(Serialize)]
#[serde(tag = "section", rename_all = "snake_case")]
enum Line<'a> {
    Data(&'a DataSection),
    Balance(&'a BalanceSection),
    Solver(&'a SolverSection),
    Model {
        model: &'a str,
        scale: TreatmentScale,
        level: f64,
        bootstrap: &'a Option<BootstrapSection>,
    },
    Coefficient(&'a CoefficientRow),
    Transform(&'a StandardizationTransform),
    Spline {
        interior_knots: usize,
        order: usize,
        basis_size: usize,
        min_singular_value: f64,
    },
    SplinePoint(&'a SplinePoint),
}

/// One JSON object per line, tagged with a `section` field.
pub fn render_json_lines(report: &AnalysisReport) -> Result<String> {
    let mut lines = vec![
        Line::Data(&report.data),
        Line::Balance(&report.balance),
        Line::Solver(&report.solver),
    ];
    if let Some(model) = &report.model {
        lines.push(Line::Model {
            model,
            scale: report.scale,
            level: report.level,
            bootstrap: &report.bootstrap,
        });
        lines.extend(report.coefficients.iter().map(Line::Coefficient));
    }
    lines.push(Line::Transform(&report.transform));
    if let Some(sp) = &report.spline {
        lines.push(Line::Spline {
            interior_knots: sp.interior_knots,
            order: sp.order,
            basis_size: sp.basis_size,
            min_singular_value: sp.min_singular_value,
        });
        lines.extend(sp.grid.iter().map(Line::SplinePoint));
    }
    let mut out = String::new();
    for line in &lines {
        out.push_str(
            &serde_json::to_string(line).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn render(report: &AnalysisReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Table => Ok(render_table(report)),
        OutputFormat::JsonLines => render_json_lines(report),
    }
}

/// Simulation summary table: one block per scenario and sample size.
pub fn render_scenarios_table(reports: &[ScenarioReport]) -> String {
    let mut out = String::new();
    for (idx, r) in reports.iter().enumerate() {
        if idx > 0 {
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "Scenario {} ({} / {}, n = {}, {} replications, B = {}, seed {})",
            r.scenario,
            r.treatment_model,
            r.outcome_spec,
            r.n,
            r.replications,
            r.bootstrap_b,
            r.seed
        );
        let _ = writeln!(
            out,
            "  unweighted mean -2 log Lambda  {}",
            opt(r.mean_unweighted_balance)
        );
        let pct = fmt_percent(r.level);
        let coef_rows: Vec<_> = r
            .methods
            .iter()
            .flat_map(|m| m.coefficients.iter().map(move |c| (m, c)))
            .collect();
        if !coef_rows.is_empty() {
            let _ = writeln!(
                out,
                "  {:<10}{:<8}{:>12}{:>12}{:>12}{:>14}{:>14}{:>14}{:>14}",
                "method",
                "term",
                "truth",
                "bias",
                "RMSE",
                format!("Wald {pct}%"),
                "Wald width",
                format!("boot {pct}%"),
                "boot width"
            );
            for (m, c) in coef_rows {
                let _ = writeln!(
                    out,
                    "  {:<10}{:<8}{:>12}{:>12}{:>12}{:>14}{:>14}{:>14}{:>14}",
                    m.method,
                    c.term,
                    fmt_sig(c.truth),
                    fmt_sig(c.mean_bias),
                    fmt_sig(c.rmse),
                    opt(c.wald_coverage),
                    opt(c.wald_width),
                    opt(c.bootstrap_coverage),
                    opt(c.bootstrap_width)
                );
            }
        }
        for m in &r.methods {
            if m.spline_mise.is_some() {
                let knots = match m.spline_interior_knots {
                    Some((lo, hi)) if lo == hi => format!("m = {lo}"),
                    Some((lo, hi)) => format!("m = {lo}..{hi}"),
                    None => "-".to_string(),
                };
                let _ = writeln!(
                    out,
                    "  {:<10}MISE {}  mean RMSE {}  ({knots})",
                    m.method,
                    opt(m.spline_mise),
                    opt(m.spline_mean_rmse)
                );
            }
        }
        for m in &r.methods {
            if let Some(stat) = m.mean_balance_statistic {
                let _ = writeln!(
                    out,
                    "  {:<10}mean weighted -2 log Lambda  {}",
                    m.method,
                    fmt_sig(stat)
                );
            }
        }
        for m in &r.methods {
            if m.not_applicable {
                let _ = writeln!(out, "  {:<10}not applicable", m.method);
            } else if m.failed > 0 {
                let _ = writeln!(
                    out,
                    "  {:<10}{} of {} replications failed",
                    m.method,
                    m.failed,
                    m.failed + m.succeeded
                );
            }
        }
        let _ = writeln!(out, "  not implemented: {}", r.not_implemented.join(", "));
    }
    out
}

/// One JSON object per scenario report.
pub fn render_scenarios_json_lines(reports: &[ScenarioReport]) -> Result<String> {
    json_lines(reports)
}

/// One JSON object per item.
pub fn json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(
            &serde_json::to_string(item).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

/// Column names of the smoking-style fixture.
pub const NMES_COVARIATES: [&str; 9] = [
    "age",
    "male",
    "white",
    "married",
    "education",
    "income",
    "region",
    "seatbelt",
    "lastage",
];
pub const NMES_TREATMENTS: [&str; 2] = ["duration", "frequency"];
pub const NMES_OUTCOME: &str = "log_expenditure";

/// Writes a medical-expenditure-style CSV: nine covariates, two smoking
/// treatments, a log-cost outcome, an unused id column, and scattered
/// missing cells.
pub fn nmes_like_fixture(n: usize, seed: u64) -> Result<String> {
    let mut rng = stream(seed, 0, StreamTag::Fixture);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), NMES_OUTCOME.to_string()];
    header.extend(NMES_TREATMENTS.iter().map(|s| s.to_string()));
    header.extend(NMES_COVARIATES.iter().map(|s| s.to_string()));
    writer
        .write_record(&header)
        .map_err(|e| Error::Io(e.into()))?;
    for i in 0..n {
        let z = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        let age = (45.0 + 12.0 * z(&mut rng)).clamp(19.0, 94.0).round();
        let male = f64::from(rng.random_bool(0.45));
        let white = f64::from(rng.random_bool(0.8));
        let married = f64::from(rng.random_bool(0.6));
        let education = rng.random_range(1..=4) as f64;
        let income = rng.random_range(1..=5) as f64;
        let region = rng.random_range(1..=4) as f64;
        let seatbelt = rng.random_range(1..=3) as f64;
        let lastage = (age - rng.random_range(0.0..3.0)).round();
        let a = (age - 45.0) / 12.0;
        let duration =
            (20.0 + 6.0 * a + 2.0 * male - 1.5 * (education - 2.5) + 5.0 * z(&mut rng)).max(1.0);
        let frequency = (15.0 + 3.0 * male + 0.8 * (seatbelt - 2.0) - 1.0 * (income - 3.0)
            + 6.0 * z(&mut rng))
        .max(1.0);
        let outcome = 5.0
            + 0.02 * duration
            + 0.01 * frequency
            + 0.3 * a
            + 0.2 * male
            + 0.1 * (income - 3.0)
            + 0.15 * (education - 2.5)
            + z(&mut rng);
        let mut cells = vec![
            (i + 1).to_string(),
            format!("{outcome}"),
            format!("{duration}"),
            format!("{frequency}"),
        ];
        cells.extend(
            [
                age, male, white, married, education, income, region, seatbelt, lastage,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        // Roughly 3% of rows lose one used value, blank or NA.
        if rng.random_bool(0.03) {
            let slot = rng.random_range(1..cells.len());
            cells[slot] = if rng.random_bool(0.5) {
                String::new()
            } else {
                "NA".into()
            };
        }
        writer
            .write_record(&cells)
            .map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV text for a simulated study with known effect coefficients.
pub fn simulated_fixture(spec: &DataSpec, n: usize, seed: u64) -> Result<String> {
    let data = simulation::generate(spec, n, seed, 0)?;
    let s = &data.sample;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string()];
    header.extend((1..=s.p()).map(|k| format!("t{k}")));
    header.extend((1..=s.q()).map(|j| format!("x{j}")));
    writer
        .write_record(&header)
        .map_err(|e| Error::Io(e.into()))?;
    for i in 0..s.n() {
        let mut cells = vec![s.outcomes()[i].to_string()];
        cells.extend(s.treatments().row(i).iter().map(|v| v.to_string()));
        cells.extend(s.covariates().row(i).iter().map(|v| v.to_string()));
        writer
            .write_record(&cells)
            .map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs every scenario in a TOML file. Returns the rendered report and the
/// per-replication log as json-lines.
pub fn simulate_file(path: &Path, format: OutputFormat) -> Result<(String, String)> {
    let file = simulation::ScenarioFile::load(path)?;
    let mut reports = Vec::new();
    let mut log = Vec::new();
    for cfg in file.expand()? {
        let (report, records) = simulation::run_scenario_with_log(&cfg)?;
        reports.push(report);
        log.extend(records);
    }
    let text = match format {
        OutputFormat::Table => render_scenarios_table(&reports),
        OutputFormat::JsonLines => render_scenarios_json_lines(&reports)?,
    };
    Ok((text, json_lines(&log)?))
}

/// Writes the fixture files into `dir` and returns their paths.
pub fn write_fixtures(dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let spec = DataSpec::default();
    let truth: std::collections::BTreeMap<String, f64> = LinearEffectModel::main_effects(2)?
        .labels()
        .into_iter()
        .map(|term| {
            let value = if term == "1" {
                spec.outcome_spec.covariate_mean()
            } else {
                spec.true_coefficients.get(&term).unwrap_or(0.0)
            };
            (term, value)
        })
        .collect();
    let files = [
        ("nmes_like.csv", nmes_like_fixture(2000, seed)?),
        ("y1_t2dl.csv", simulated_fixture(&spec, 1000, seed)?),
        (
            "y1_t2dl_truth.json",
            serde_json::to_string_pretty(&truth)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                + "\n",
        ),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(-0.0123456789), "-0.0123457");
        assert_eq!(fmt_sig(123456.7), "123457");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig(9.9999996), "10.0000");
        assert_eq!(fmt_sig(3.95e-8), "3.95000e-8");
    }

    #[test]
    fn parse_cell_rules() {
        assert_eq!(parse_cell(" 2.5 "), Some(2.5));
        assert_eq!(parse_cell(""), None);
        assert_eq!(parse_cell("NA"), None);
        assert_eq!(parse_cell("abc"), None);
        assert_eq!(parse_cell("inf"), None);
    }

    #[test]
    fn overlapping_roles_rejected() {
        let cfg = AnalysisConfig::new("x.csv", "y", &["t1"], &["t1"]);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}
