//! Estimation pipelines behind one interface: the joint entropy-balancing
//! estimator and the two baselines it is compared against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::{
    check_model, fit_parametric, normalized_weights, sandwich_from_design, sandwich_variance,
    weighted_least_squares, EffectEstimate,
};
use super::model::{LinearEffectModel, Term};
use crate::balance::{solve_weights, SolverConfig, WeightSolution};
use crate::data::{
    build_balance_problem_with, standardize, FeatureOptions, Sample, StandardizationTransform,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    /// Joint entropy balancing over all treatments.
    Ebmt,
    /// Unweighted regression adjusting for covariates in the outcome model.
    Rcam,
    /// Entropy balancing one treatment at a time.
    Ebut,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ebmt => "EBMT",
            Method::Rcam => "RCAM",
            Method::Ebut => "EBUT",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EBMT" => Ok(Method::Ebmt),
            "RCAM" => Ok(Method::Rcam),
            "EBUT" => Ok(Method::Ebut),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Scale on which the outcome model sees the treatments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentScale {
    #[default]
    Original,
    Standardized,
}

/// A full estimation pipeline mapping a raw sample to effect coefficients.
pub trait EffectEstimator: Sync {
    fn method(&self) -> Method;

    fn model(&self) -> &LinearEffectModel;

    /// Coefficients only; used inside resampling loops.
    fn point_estimate(&self, sample: &Sample) -> Result<EffectEstimate>;

    /// Coefficients with sandwich covariance and Wald intervals.
    fn estimate(&self, sample: &Sample, level: f64) -> Result<EffectEstimate>;
}

#[derive(Debug, Clone)]
pub struct Ebmt {
    pub model: LinearEffectModel,
    pub solver: SolverConfig,
    pub features: FeatureOptions,
    pub treatment_scale: TreatmentScale,
}

/// Everything the joint estimator produces for one sample.
#[derive(Debug, Clone)]
pub struct EbmtFit {
    pub estimate: EffectEstimate,
    pub solution: WeightSolution,
    pub transform: StandardizationTransform,
    pub standardized: Sample,
}

impl Ebmt {
    pub fn new(model: LinearEffectModel) -> Self {
        Self {
            model,
            solver: SolverConfig::default(),
            features: FeatureOptions::default(),
            treatment_scale: TreatmentScale::Original,
        }
    }

    pub fn weights(
        &self,
        sample: &Sample,
    ) -> Result<(WeightSolution, StandardizationTransform, Sample)> {
        let (standardized, transform) = standardize(sample)?;
        let problem = build_balance_problem_with(&standardized, None, self.features)?;
        let solution = solve_weights(&problem, &self.solver)?;
        Ok((solution, transform, standardized))
    }

    fn outcome_sample<'a>(&self, raw: &'a Sample, standardized: &'a Sample) -> &'a Sample {
        match self.treatment_scale {
            TreatmentScale::Original => raw,
            TreatmentScale::Standardized => standardized,
        }
    }

    pub fn fit(&self, sample: &Sample, level: Option<f64>) -> Result<EbmtFit> {
        check_model(sample, &self.model)?;
        let (solution, transform, standardized) = self.weights(sample)?;
        let target = self.outcome_sample(sample, &standardized);
        let w = solution.weights.as_slice();
        let mut estimate = fit_parametric(target, w, &self.model)?;
        if let Some(level) = level {
            let v = sandwich_variance(target, w, &self.model, &estimate.theta_hat)?;
            estimate = estimate.with_covariance(v).with_wald(level);
        }
        Ok(EbmtFit {
            estimate,
            solution,
            transform,
            standardized,
        })
    }
}

impl EffectEstimator for Ebmt {
    fn method(&self) -> Method {
        Method::Ebmt
    }

    fn model(&self) -> &LinearEffectModel {
        &self.model
    }

    fn point_estimate(&self, sample: &Sample) -> Result<EffectEstimate> {
        Ok(self.fit(sample, None)?.estimate)
    }

    fn estimate(&self, sample: &Sample, level: f64) -> Result<EffectEstimate> {
        Ok(self.fit(sample, Some(level))?.estimate)
    }
}

/// Ordinary least squares of `Y` on `[phi(T), X]`; only the `phi` block is
/// reported.
#[derive(Debug, Clone)]
pub struct Rcam {
    pub model: LinearEffectModel,
}

impl Rcam {
    pub fn new(model: LinearEffectModel) -> Self {
        Self { model }
    }

    fn design(&self, sample: &Sample) -> DMatrix<f64> {
        let phi = self.model.design(sample.treatments());
        let (n, j, q) = (sample.n(), phi.ncols(), sample.q());
        let mut design = DMatrix::zeros(n, j + q);
        design.columns_mut(0, j).copy_from(&phi);
        design.columns_mut(j, q).copy_from(sample.covariates());
        design
    }

    fn fit(&self, sample: &Sample, level: Option<f64>) -> Result<EffectEstimate> {
        check_model(sample, &self.model)?;
        let n = sample.n();
        let j = self.model.len();
        let design = self.design(sample);
        let w = DVector::from_element(n, 1.0 / n as f64);
        let coef = weighted_least_squares(&design, sample.outcomes(), &w)?;
        let theta = coef.rows(0, j).into_owned();
        let mut estimate = EffectEstimate::new(self.model.labels(), theta, n);
        if let Some(level) = level {
            let v = sandwich_from_design(&design, sample.outcomes(), &w, &coef)?;
            estimate = estimate
                .with_covariance(v.view((0, 0), (j, j)).into_owned())
                .with_wald(level);
        }
        Ok(estimate)
    }
}

impl EffectEstimator for Rcam {
    fn method(&self) -> Method {
        Method::Rcam
    }

    fn model(&self) -> &LinearEffectModel {
        &self.model
    }

    fn point_estimate(&self, sample: &Sample) -> Result<EffectEstimate> {
        self.fit(sample, None)
    }

    fn estimate(&self, sample: &Sample, level: f64) -> Result<EffectEstimate> {
        self.fit(sample, Some(level))
    }
}

/// Balances each treatment separately (`p = 1` sub-problems whose covariates
/// are `X` plus the other treatments). The full outcome model is refit under each treatment's own
/// weights and a term is read off the fit for the treatment it involves; the
/// intercept comes from the first treatment's fit. Interaction terms are not
/// supported. Covariances between coefficients taken from different fits are
/// not estimated and are reported as zero.
#[derive(Debug, Clone)]
pub struct Ebut {
    pub model: LinearEffectModel,
    pub solver: SolverConfig,
}

impl Ebut {
    pub fn new(model: LinearEffectModel) -> Self {
        Self {
            model,
            solver: SolverConfig::default(),
        }
    }

    fn owner(term: &Term) -> usize {
        match *term {
            Term::Intercept => 0,
            Term::Main(k) | Term::Square(k) => k,
            Term::Interaction(..) => unreachable!("rejected before fitting"),
        }
    }

    /// Weights from the `p = 1` balance problem of treatment `k`, in which the
    /// other treatments join the covariates as confounders.
    pub fn weights_for(&self, sample: &Sample, k: usize) -> Result<WeightSolution> {
        let single = sample.with_treatment_columns(&[k])?;
        let others: Vec<usize> = (0..sample.p()).filter(|&l| l != k).collect();
        let (n, q) = (sample.n(), sample.q());
        let covariates = DMatrix::from_fn(n, q + others.len(), |i, j| {
            if j < q {
                sample.covariates()[(i, j)]
            } else {
                sample.treatments()[(i, others[j - q])]
            }
        });
        let single = Sample::new(
            single.outcomes().clone(),
            single.treatments().clone(),
            covariates,
        )?;
        let (standardized, _) = standardize(&single)?;
        let problem = build_balance_problem_with(&standardized, None, FeatureOptions::default())?;
        solve_weights(&problem, &self.solver)
    }

    fn fit(&self, sample: &Sample, level: Option<f64>) -> Result<EffectEstimate> {
        check_model(sample, &self.model)?;
        if self.model.has_interactions() {
            return Err(Error::Unsupported {
                method: "EBUT".into(),
                what: "treatment interaction terms".into(),
            });
        }
        let j = self.model.len();
        let mut theta = DVector::zeros(j);
        let mut cov = DMatrix::zeros(j, j);
        for k in 0..sample.p() {
            let owned: Vec<usize> = (0..j)
                .filter(|&i| Self::owner(&self.model.terms()[i]) == k)
                .collect();
            if owned.is_empty() {
                continue;
            }
            let solution = self.weights_for(sample, k)?;
            let w = solution.weights.as_slice();
            let est = fit_parametric(sample, w, &self.model)?;
            let v = match level {
                Some(_) => Some(sandwich_variance(sample, w, &self.model, &est.theta_hat)?),
                None => None,
            };
            for &a in &owned {
                theta[a] = est.theta_hat[a];
                if let Some(v) = &v {
                    for &b in &owned {
                        cov[(a, b)] = v[(a, b)];
                    }
                }
            }
        }
        let mut estimate = EffectEstimate::new(self.model.labels(), theta, sample.n());
        if let Some(level) = level {
            estimate = estimate.with_covariance(cov).with_wald(level);
        }
        Ok(estimate)
    }
}

impl EffectEstimator for Ebut {
    fn method(&self) -> Method {
        Method::Ebut
    }

    fn model(&self) -> &LinearEffectModel {
        &self.model
    }

    fn point_estimate(&self, sample: &Sample) -> Result<EffectEstimate> {
        self.fit(sample, None)
    }

    fn estimate(&self, sample: &Sample, level: f64) -> Result<EffectEstimate> {
        self.fit(sample, Some(level))
    }
}

/// Boxed estimator for a method name.
pub fn estimator_for(
    method: Method,
    model: LinearEffectModel,
    solver: SolverConfig,
) -> Box<dyn EffectEstimator> {
    match method {
        Method::Ebmt => Box::new(Ebmt {
            solver,
            ..Ebmt::new(model)
        }),
        Method::Rcam => Box::new(Rcam::new(model)),
        Method::Ebut => Box::new(Ebut { model, solver }),
    }
}

/// Uniform-weight least squares on `phi(T)`, for comparisons.
pub fn unweighted_fit(sample: &Sample, model: &LinearEffectModel) -> Result<EffectEstimate> {
    let w = normalized_weights(&vec![1.0; sample.n()], sample.n())?;
    fit_parametric(sample, w.as_slice(), model)
}
