use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::generate;
use super::scenario::{Analysis, ScenarioConfig};
use crate::data::standardize;
use crate::diagnostics::balance_test;
use crate::error::Result;
use crate::parametric::{
    bootstrap_ci, BootstrapConfig, Ebmt, Ebut, EffectEstimate, EffectEstimator, Method, Rcam,
};
use crate::rng::{subseed, StreamTag};
use crate::spline::fit_spline_reducing_knots;

/// Label for the uniform-weight spline fit reported next to EBMT.
pub const UNWEIGHTED: &str = "Unweighted";
/// Methods named in reports that this crate does not implement.
pub const NOT_IMPLEMENTED: &[&str] = &["mvGPS"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum MethodStatus {
    Ok,
    Failed { error: String },
    NotApplicable { reason: String },
}

/// What one method produced in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    #[serde(flatten)]
    pub status: MethodStatus,
    pub terms: Vec<String>,
    pub estimates: Vec<f64>,
    pub wald: Vec<(f64, f64)>,
    pub bootstrap: Vec<(f64, f64)>,
    pub bootstrap_failed: usize,
    /// Weighted balance statistic for methods that produce joint weights.
    pub balance_statistic: Option<f64>,
    /// In-sample mean squared error of the fitted effect surface.
    pub spline_mse: Option<f64>,
    /// Interior knots per dimension after any reduction for conditioning.
    pub spline_interior_knots: Option<usize>,
}

impl MethodOutcome {
    fn empty(method: &str, status: MethodStatus) -> Self {
        Self {
            method: method.to_string(),
            status,
            terms: vec![],
            estimates: vec![],
            wald: vec![],
            bootstrap: vec![],
            bootstrap_failed: 0,
            balance_statistic: None,
            spline_mse: None,
            spline_interior_knots: None,
        }
    }

    fn from_estimate(method: &str, est: &EffectEstimate) -> Self {
        let mut out = Self::empty(method, MethodStatus::Ok);
        out.terms = est.terms.clone();
        out.estimates = est.theta_hat.iter().copied().collect();
        out.wald = est
            .wald_ci
            .as_ref()
            .map(|ci| ci.iter().map(|i| (i.lower, i.upper)).collect())
            .unwrap_or_default();
        out
    }

    pub fn is_ok(&self) -> bool {
        self.status == MethodStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    pub n: usize,
    pub replication: usize,
    pub unweighted_balance: Option<f64>,
    pub methods: Vec<MethodOutcome>,
}

fn failed(method: &str, err: impl ToString) -> MethodOutcome {
    MethodOutcome::empty(
        method,
        MethodStatus::Failed {
            error: err.to_string(),
        },
    )
}

fn run_parametric<E: EffectEstimator>(
    estimator: &E,
    config: &ScenarioConfig,
    sample: &crate::data::Sample,
    replication: usize,
) -> MethodOutcome {
    let name = estimator.method().name();
    let est = match estimator.estimate(sample, config.level) {
        Ok(est) => est,
        Err(e) => return failed(name, e),
    };
    let mut out = MethodOutcome::from_estimate(name, &est);
    if config.bootstrap_b > 0 {
        let boot = BootstrapConfig::new(
            config.bootstrap_b,
            config.level,
            subseed(config.seed, replication as u64, StreamTag::Bootstrap),
        );
        match bootstrap_ci(sample, estimator, &boot) {
            Ok(summary) => {
                out.bootstrap = summary
                    .intervals
                    .iter()
                    .map(|i| (i.lower, i.upper))
                    .collect();
                out.bootstrap_failed = summary.failed;
            }
            Err(e) => return failed(name, e),
        }
    }
    out
}

/// Runs every configured method on replication `replication`.
pub fn run_replication(config: &ScenarioConfig, replication: usize) -> Result<ReplicationRecord> {
    let data = generate(
        &config.data_spec(),
        config.n,
        config.seed,
        replication as u64,
    )?;
    let sample = &data.sample;
    let unweighted_balance = standardize(sample)
        .and_then(|(z, _)| balance_test(&z, None))
        .ok()
        .map(|r| r.minus_two_log_lambda);

    let mut methods = Vec::new();
    match config.analysis {
        Analysis::Parametric => {
            let model = config.outcome_model()?;
            for &method in &config.methods {
                let outcome = match method {
                    Method::Ebmt => {
                        let ebmt = Ebmt {
                            solver: config.solver,
                            features: config.features,
                            ..Ebmt::new(model.clone())
                        };
                        let mut out = run_parametric(&ebmt, config, sample, replication);
                        if out.is_ok() {
                            out.balance_statistic = ebmt
                                .weights(sample)
                                .and_then(|(sol, _, z)| {
                                    balance_test(&z, Some(sol.weights.as_slice()))
                                })
                                .ok()
                                .map(|r| r.minus_two_log_lambda);
                        }
                        out
                    }
                    Method::Rcam => {
                        run_parametric(&Rcam::new(model.clone()), config, sample, replication)
                    }
                    Method::Ebut => {
                        if model.has_interactions() {
                            MethodOutcome::empty(
                                "EBUT",
                                MethodStatus::NotApplicable {
                                    reason:
                                        "per-treatment balancing cannot estimate interaction terms"
                                            .into(),
                                },
                            )
                        } else {
                            let ebut = Ebut {
                                solver: config.solver,
                                ..Ebut::new(model.clone())
                            };
                            run_parametric(&ebut, config, sample, replication)
                        }
                    }
                };
                methods.push(outcome);
            }
        }
        Analysis::Spline => {
            let spline = config.spline_config();
            let mse = |weights: &[f64]| -> Result<(f64, usize)> {
                let (fit, knots) = fit_spline_reducing_knots(sample, weights, &spline)?;
                let t = sample.treatments();
                let mut row = vec![0.0; t.ncols()];
                let mut total = 0.0;
                for i in 0..sample.n() {
                    for (k, slot) in row.iter_mut().enumerate() {
                        *slot = t[(i, k)];
                    }
                    total += (fit.predict(&row)? - data.true_effects[i]).powi(2);
                }
                Ok((total / sample.n() as f64, knots))
            };
            for &method in &config.methods {
                let outcome = match method {
                    Method::Ebmt => {
                        let ebmt = Ebmt {
                            solver: config.solver,
                            features: config.features,
                            ..Ebmt::new(config.outcome_model().unwrap_or_else(|_| {
                                crate::parametric::LinearEffectModel::main_effects(sample.p())
                                    .expect("p >= 1")
                            }))
                        };
                        match ebmt.weights(sample) {
                            Ok((sol, _, z)) => match mse(sol.weights.as_slice()) {
                                Ok((value, knots)) => {
                                    let mut out = MethodOutcome::empty("EBMT", MethodStatus::Ok);
                                    out.spline_mse = Some(value);
                                    out.spline_interior_knots = Some(knots);
                                    out.balance_statistic =
                                        balance_test(&z, Some(sol.weights.as_slice()))
                                            .ok()
                                            .map(|r| r.minus_two_log_lambda);
                                    out
                                }
                                Err(e) => failed("EBMT", e),
                            },
                            Err(e) => failed("EBMT", e),
                        }
                    }
                    other => MethodOutcome::empty(
                        other.name(),
                        MethodStatus::NotApplicable {
                            reason: "no spline variant of this method".into(),
                        },
                    ),
                };
                methods.push(outcome);
            }
            let uniform = vec![1.0; sample.n()];
            methods.push(match mse(&uniform) {
                Ok((value, knots)) => {
                    let mut out = MethodOutcome::empty(UNWEIGHTED, MethodStatus::Ok);
                    out.spline_mse = Some(value);
                    out.spline_interior_knots = Some(knots);
                    out
                }
                Err(e) => failed(UNWEIGHTED, e),
            });
        }
    }
    Ok(ReplicationRecord {
        scenario: config.name.clone(),
        n: config.n,
        replication,
        unweighted_balance,
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub term: String,
    pub truth: f64,
    pub mean_bias: f64,
    pub rmse: f64,
    pub wald_coverage: Option<f64>,
    pub wald_width: Option<f64>,
    pub bootstrap_coverage: Option<f64>,
    pub bootstrap_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub succeeded: usize,
    pub failed: usize,
    pub not_applicable: bool,
    pub mean_balance_statistic: Option<f64>,
    pub coefficients: Vec<CoefficientSummary>,
    /// Mean over replications of the in-sample MSE of the effect surface.
    pub spline_mise: Option<f64>,
    /// Mean over replications of the in-sample RMSE of the effect surface.
    pub spline_mean_rmse: Option<f64>,
    /// Smallest and largest interior-knot count used across replications.
    pub spline_interior_knots: Option<(usize, usize)>,
}

impl MethodSummary {
    pub fn coefficient(&self, term: &str) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub treatment_model: String,
    pub outcome_spec: String,
    pub n: usize,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub level: f64,
    pub mean_unweighted_balance: Option<f64>,
    pub methods: Vec<MethodSummary>,
    pub not_implemented: Vec<String>,
}

impl ScenarioReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn interval_stats(intervals: &[(f64, f64)], truth: f64) -> (Option<f64>, Option<f64>) {
    let cover: Vec<f64> = intervals
        .iter()
        .map(|&(lo, hi)| if lo <= truth && truth <= hi { 1.0 } else { 0.0 })
        .collect();
    let width: Vec<f64> = intervals.iter().map(|&(lo, hi)| hi - lo).collect();
    (mean(&cover), mean(&width))
}

/// Folds per-replication records (in replication order) into a report.
pub fn aggregate(config: &ScenarioConfig, records: &[ReplicationRecord]) -> ScenarioReport {
    let mut names: Vec<String> = Vec::new();
    for rec in records {
        for m in &rec.methods {
            if !names.contains(&m.method) {
                names.push(m.method.clone());
            }
        }
    }
    let methods = names
        .iter()
        .map(|name| {
            let outcomes: Vec<&MethodOutcome> = records
                .iter()
                .filter_map(|r| r.methods.iter().find(|m| &m.method == name))
                .collect();
            let ok: Vec<&MethodOutcome> = outcomes.iter().copied().filter(|o| o.is_ok()).collect();
            let failed = outcomes
                .iter()
                .filter(|o| matches!(o.status, MethodStatus::Failed { .. }))
                .count();
            let not_applicable = !outcomes.is_empty()
                && outcomes
                    .iter()
                    .all(|o| matches!(o.status, MethodStatus::NotApplicable { .. }));
            let terms = ok.first().map(|o| o.terms.clone()).unwrap_or_default();
            let coefficients = terms
                .iter()
                .enumerate()
                .filter_map(|(j, term)| {
                    let truth = match config.true_coefficients.get(term) {
                        Some(v) => v,
                        None if term == "1" => config.outcome_spec.covariate_mean(),
                        None => return None,
                    };
                    let errors: Vec<f64> = ok.iter().map(|o| o.estimates[j] - truth).collect();
                    let mean_bias = mean(&errors)?;
                    let rmse = mean(&errors.iter().map(|e| e * e).collect::<Vec<_>>())?.sqrt();
                    let wald: Vec<(f64, f64)> =
                        ok.iter().filter_map(|o| o.wald.get(j).copied()).collect();
                    let boot: Vec<(f64, f64)> = ok
                        .iter()
                        .filter_map(|o| o.bootstrap.get(j).copied())
                        .collect();
                    let (wald_coverage, wald_width) = interval_stats(&wald, truth);
                    let (bootstrap_coverage, bootstrap_width) = interval_stats(&boot, truth);
                    Some(CoefficientSummary {
                        term: term.clone(),
                        truth,
                        mean_bias,
                        rmse,
                        wald_coverage,
                        wald_width,
                        bootstrap_coverage,
                        bootstrap_width,
                    })
                })
                .collect();
            let balance: Vec<f64> = ok.iter().filter_map(|o| o.balance_statistic).collect();
            let mse: Vec<f64> = ok.iter().filter_map(|o| o.spline_mse).collect();
            MethodSummary {
                method: name.clone(),
                succeeded: ok.len(),
                failed,
                not_applicable,
                mean_balance_statistic: mean(&balance),
                coefficients,
                spline_mise: mean(&mse),
                spline_mean_rmse: mean(&mse.iter().map(|v| v.sqrt()).collect::<Vec<_>>()),
                spline_interior_knots: ok.iter().filter_map(|o| o.spline_interior_knots).fold(
                    None,
                    |acc, m| match acc {
                        None => Some((m, m)),
                        Some((lo, hi)) => Some((lo.min(m), hi.max(m))),
                    },
                ),
            }
        })
        .collect();
    let unweighted: Vec<f64> = records
        .iter()
        .filter_map(|r| r.unweighted_balance)
        .collect();
    ScenarioReport {
        scenario: config.name.clone(),
        treatment_model: format!("{:?}", config.treatment_model),
        outcome_spec: format!("{:?}", config.outcome_spec),
        n: config.n,
        replications: config.replications,
        bootstrap_b: config.bootstrap_b,
        seed: config.seed,
        level: config.level,
        mean_unweighted_balance: mean(&unweighted),
        methods,
        not_implemented: NOT_IMPLEMENTED.iter().map(|s| s.to_string()).collect(),
    }
}

/// Report plus the per-replication log it was built from.
pub fn run_scenario_with_log(
    config: &ScenarioConfig,
) -> Result<(ScenarioReport, Vec<ReplicationRecord>)> {
    config.validate()?;
    let records = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate(config, &records), records))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    Ok(run_scenario_with_log(config)?.0)
}
