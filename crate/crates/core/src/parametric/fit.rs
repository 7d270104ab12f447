use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::model::LinearEffectModel;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::linalg::{pivoted_least_squares, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Percentile-bootstrap summary for every coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub level: f64,
    pub intervals: Vec<Interval>,
    pub standard_errors: Vec<f64>,
    pub requested: usize,
    pub effective: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub terms: Vec<String>,
    pub theta_hat: DVector<f64>,
    /// Asymptotic covariance of `sqrt(n) (theta_hat - theta)`.
    pub covariance: Option<DMatrix<f64>>,
    /// `sqrt(V_jj / n)`.
    pub standard_errors: Option<DVector<f64>>,
    pub wald_level: Option<f64>,
    pub wald_ci: Option<Vec<Interval>>,
    pub bootstrap: Option<BootstrapSummary>,
    pub n_used: usize,
}

impl EffectEstimate {
    pub fn new(terms: Vec<String>, theta_hat: DVector<f64>, n_used: usize) -> Self {
        Self {
            terms,
            theta_hat,
            covariance: None,
            standard_errors: None,
            wald_level: None,
            wald_ci: None,
            bootstrap: None,
            n_used,
        }
    }

    pub fn with_covariance(mut self, covariance: DMatrix<f64>) -> Self {
        let n = self.n_used as f64;
        self.standard_errors = Some(covariance.diagonal().map(|v| (v.max(0.0) / n).sqrt()));
        self.covariance = Some(covariance);
        self
    }

    pub fn with_wald(mut self, level: f64) -> Self {
        self.wald_ci = wald_ci(&self, level);
        self.wald_level = self.wald_ci.as_ref().map(|_| level);
        self
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Checks a weight vector and rescales it to sum to one.
pub(crate) fn normalized_weights(weights: &[f64], n: usize) -> Result<DVector<f64>> {
    if weights.len() != n {
        return Err(Error::WeightVectorInvalid(format!(
            "expected {n} weights, got {}",
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::WeightVectorInvalid(format!(
            "weight {i} is not a positive finite number"
        )));
    }
    let total: f64 = weights.iter().sum();
    Ok(DVector::from_iterator(n, weights.iter().map(|w| w / total)))
}

/// Weighted least squares `min_theta sum w_i (y_i - design_i' theta)^2`.
pub(crate) fn weighted_least_squares(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let root = w.map(f64::sqrt);
    let mut a = design.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= root[i];
    }
    let b = y.component_mul(&root);
    pivoted_least_squares(&a, &b).map_err(|column| Error::RankDeficientDesign { column })
}

/// Minimizes `sum w_i (Y_i - s(T_i; theta))^2`. Weights are rescaled to sum
/// to one first, so any positive multiple gives the same answer.
pub fn fit_parametric(
    sample: &Sample,
    weights: &[f64],
    model: &LinearEffectModel,
) -> Result<EffectEstimate> {
    check_model(sample, model)?;
    let w = normalized_weights(weights, sample.n())?;
    let design = model.design(sample.treatments());
    let theta = weighted_least_squares(&design, sample.outcomes(), &w)?;
    Ok(EffectEstimate::new(model.labels(), theta, sample.n()))
}

pub(crate) fn check_model(sample: &Sample, model: &LinearEffectModel) -> Result<()> {
    if model.p() != sample.p() {
        return Err(Error::InvalidModel(format!(
            "model is over {} treatments but the sample has {}",
            model.p(),
            sample.p()
        )));
    }
    Ok(())
}

/// Sandwich `U^-1 M U^-1` for a model linear in its parameters, with
///
/// ```text
/// U = (1/n) sum w_i phi_i phi_i'
/// M = (1/n) sum w_i^2 (y_i - phi_i' theta)^2 phi_i phi_i'
/// ```
///
/// and `w` summing to one. The scale of `w` cancels, so the result estimates
/// the covariance of `sqrt(n) (theta_hat - theta)`.
pub(crate) fn sandwich_from_design(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = design.nrows() as f64;
    let resid = y - design * theta;
    let mut bread_rows = design.clone();
    let mut meat_rows = design.clone();
    for i in 0..design.nrows() {
        bread_rows.row_mut(i).scale_mut(w[i] / n);
        meat_rows
            .row_mut(i)
            .scale_mut((w[i] * resid[i]).powi(2) / n);
    }
    let bread = symmetrize(&design.tr_mul(&bread_rows));
    let meat = symmetrize(&design.tr_mul(&meat_rows));
    let bread_inv = bread.cholesky().ok_or(Error::SingularBread)?.inverse();
    if bread_inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBread);
    }
    Ok(symmetrize(&(&bread_inv * meat * &bread_inv)))
}

pub fn sandwich_variance(
    sample: &Sample,
    weights: &[f64],
    model: &LinearEffectModel,
    theta_hat: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_model(sample, model)?;
    let w = normalized_weights(weights, sample.n())?;
    let design = model.design(sample.treatments());
    sandwich_from_design(&design, sample.outcomes(), &w, theta_hat)
}

/// Point estimate, sandwich covariance, and Wald intervals in one call.
pub fn fit_with_inference(
    sample: &Sample,
    weights: &[f64],
    model: &LinearEffectModel,
    level: f64,
) -> Result<EffectEstimate> {
    let est = fit_parametric(sample, weights, model)?;
    let v = sandwich_variance(sample, weights, model, &est.theta_hat)?;
    Ok(est.with_covariance(v).with_wald(level))
}

/// Two-sided standard normal critical value. Exactly 1.96 at 95%.
pub fn normal_critical_value(level: f64) -> f64 {
    if (level - 0.95).abs() < 1e-12 {
        1.96
    } else {
        Normal::standard().inverse_cdf(0.5 + level / 2.0)
    }
}

/// `theta_j +- z SE_j`; `None` when no covariance has been attached.
pub fn wald_ci(estimate: &EffectEstimate, level: f64) -> Option<Vec<Interval>> {
    let se = estimate.standard_errors.as_ref()?;
    let z = normal_critical_value(level);
    Some(
        estimate
            .theta_hat
            .iter()
            .zip(se.iter())
            .map(|(theta, se)| Interval {
                lower: theta - z * se,
                upper: theta + z * se,
            })
            .collect(),
    )
}
