//! Data-generating processes for the simulation study.
//!
//! Five equicorrelated standard normal covariates (correlation 0.2), two
//! treatments driven by the covariates linearly (`T2dL`) or with an added
//! squared first covariate (`T2dNL`), and six outcome surfaces:
//!
//! | spec | treatment part                      | covariate part           |
//! |------|-------------------------------------|--------------------------|
//! | Y1   | `b1 t1 + b2 t2`                     | `x1 + .1 x2 + .1 x5`     |
//! | Y2   | `b1 t1 + b2 t2 + b12 t1 t2`         | `x1 + .1 x2 + .1 x5`     |
//! | Y3   | `b1 t1 + b2 t2 + (t1 - t2)^2`       | `x1 + .1 x2 + .1 x5`     |
//! | Y4-6 | as Y1-3                             | `(x1 + 1)^3 + .1 x2 + .1 x5` |
//!
//! Outcome noise is `N(0, 2^2)`; treatment noise is bivariate normal with
//! variances 3 and covariance 0.8.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::{stream, subseed, StreamTag};

pub const NUM_COVARIATES: usize = 5;
pub const COVARIATE_CORRELATION: f64 = 0.2;
pub const OUTCOME_NOISE_SD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreatmentModel {
    /// `T = B1' X + e`.
    T2dL,
    /// `T = B1' X + B2' (X * X) + e`.
    T2dNL,
    /// Three-treatment linear model used for smoke runs.
    T3dL,
}

impl TreatmentModel {
    pub fn p(&self) -> usize {
        match self {
            TreatmentModel::T2dL | TreatmentModel::T2dNL => 2,
            TreatmentModel::T3dL => 3,
        }
    }

    /// Linear loadings `B1` (`5 x p`).
    pub fn linear_loadings(&self) -> DMatrix<f64> {
        match self {
            TreatmentModel::T2dL | TreatmentModel::T2dNL => {
                DMatrix::from_row_slice(5, 2, &[1.0, 1.0, 0.0, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0])
            }
            TreatmentModel::T3dL => DMatrix::from_row_slice(
                5,
                3,
                &[
                    1.0, 1.0, 0.5, 0.0, 0.2, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0,
                ],
            ),
        }
    }

    /// Loadings `B2` on the squared covariates, if any.
    pub fn quadratic_loadings(&self) -> Option<DMatrix<f64>> {
        match self {
            TreatmentModel::T2dNL => {
                let mut b2 = DMatrix::zeros(5, 2);
                b2[(0, 0)] = 1.0;
                b2[(0, 1)] = 1.0;
                Some(b2)
            }
            _ => None,
        }
    }

    pub fn noise_covariance(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |i, j| if i == j { 3.0 } else { 0.8 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeSpec {
    Y1,
    Y2,
    Y3,
    Y4,
    Y5,
    Y6,
}

impl OutcomeSpec {
    pub fn has_interaction(&self) -> bool {
        matches!(self, OutcomeSpec::Y2 | OutcomeSpec::Y5)
    }

    pub fn has_squared_difference(&self) -> bool {
        matches!(self, OutcomeSpec::Y3 | OutcomeSpec::Y6)
    }

    pub fn cubic_covariate(&self) -> bool {
        matches!(self, OutcomeSpec::Y4 | OutcomeSpec::Y5 | OutcomeSpec::Y6)
    }

    /// `E[r(X)]` for the covariate part; `E[(X1 + 1)^3] = 4` for unit-variance X1.
    pub fn covariate_mean(&self) -> f64 {
        if self.cubic_covariate() {
            4.0
        } else {
            0.0
        }
    }
}

/// Named true coefficients, keyed by model term label (`t1`, `t2`, `t1:t2`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrueCoefficients(pub BTreeMap<String, f64>);

impl Default for TrueCoefficients {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("t1".to_string(), 1.0);
        m.insert("t2".to_string(), 1.0);
        m.insert("t3".to_string(), 1.0);
        m.insert("t1:t2".to_string(), 0.2);
        Self(m)
    }
}

impl TrueCoefficients {
    pub fn get(&self, term: &str) -> Option<f64> {
        self.0.get(term).copied()
    }

    fn main(&self, k: usize) -> f64 {
        self.get(&format!("t{}", k + 1)).unwrap_or(1.0)
    }

    fn interaction(&self) -> f64 {
        self.get("t1:t2").unwrap_or(0.2)
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.iter().find(|(_, v)| !v.is_finite()) {
            Some((k, _)) => Err(Error::InvalidConfig(format!(
                "true coefficient `{k}` is not finite"
            ))),
            None => Ok(()),
        }
    }

    /// Overlays `other` on the defaults.
    pub fn with_overrides(other: &BTreeMap<String, f64>) -> Self {
        let mut base = Self::default();
        for (k, v) in other {
            base.0.insert(k.clone(), *v);
        }
        base
    }
}

/// Lower Cholesky factor of the covariate covariance.
pub fn covariate_factor() -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(NUM_COVARIATES, NUM_COVARIATES, |i, j| {
        if i == j {
            1.0
        } else {
            COVARIATE_CORRELATION
        }
    });
    sigma
        .cholesky()
        .expect("equicorrelation matrix is positive definite")
        .l()
}

fn standard_normals(rows: usize, cols: usize, seed: u64, tag: StreamTag) -> DMatrix<f64> {
    let mut rng = stream(seed, 0, tag);
    let mut z = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    z
}

/// `n x 5` covariates from `N(0, Sigma)`.
pub fn gen_covariates(n: usize, seed: u64) -> DMatrix<f64> {
    let z = standard_normals(n, NUM_COVARIATES, seed, StreamTag::Covariates);
    z * covariate_factor().transpose()
}

/// Noise-free part of the treatment model.
pub fn treatment_mean(x: &DMatrix<f64>, model: TreatmentModel) -> Result<DMatrix<f64>> {
    if x.ncols() != NUM_COVARIATES {
        return Err(Error::DimensionMismatch {
            expected: NUM_COVARIATES,
            actual: x.ncols(),
        });
    }
    let mut t = x * model.linear_loadings();
    if let Some(b2) = model.quadratic_loadings() {
        t += x.component_mul(x) * b2;
    }
    Ok(t)
}

pub fn gen_treatments(x: &DMatrix<f64>, model: TreatmentModel, seed: u64) -> Result<DMatrix<f64>> {
    let p = model.p();
    let factor = model
        .noise_covariance()
        .cholesky()
        .expect("noise covariance is positive definite")
        .l();
    let noise =
        standard_normals(x.nrows(), p, seed, StreamTag::TreatmentNoise) * factor.transpose();
    Ok(treatment_mean(x, model)? + noise)
}

/// Treatment part of the outcome, `s(t) - E[r(X)]`.
fn treatment_effect(t: &[f64], spec: OutcomeSpec, coefs: &TrueCoefficients) -> f64 {
    let mut s: f64 = t.iter().enumerate().map(|(k, tk)| coefs.main(k) * tk).sum();
    if spec.has_interaction() {
        s += coefs.interaction() * t[0] * t[1];
    }
    if spec.has_squared_difference() {
        s += (t[0] - t[1]).powi(2);
    }
    s
}

/// The causal effect function `E[Y(t)]`.
pub fn true_effect(t: &[f64], spec: OutcomeSpec, coefs: &TrueCoefficients) -> f64 {
    treatment_effect(t, spec, coefs) + spec.covariate_mean()
}

/// Noise-free outcome `E[Y | T, X]`.
pub fn outcome_mean(
    t: &DMatrix<f64>,
    x: &DMatrix<f64>,
    spec: OutcomeSpec,
    coefs: &TrueCoefficients,
) -> Result<DVector<f64>> {
    if t.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: t.nrows(),
            actual: x.nrows(),
        });
    }
    if x.ncols() != NUM_COVARIATES {
        return Err(Error::DimensionMismatch {
            expected: NUM_COVARIATES,
            actual: x.ncols(),
        });
    }
    let mut row = vec![0.0; t.ncols()];
    Ok(DVector::from_fn(t.nrows(), |i, _| {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = t[(i, k)];
        }
        let x1 = x[(i, 0)];
        let lead = if spec.cubic_covariate() {
            (x1 + 1.0).powi(3)
        } else {
            x1
        };
        treatment_effect(&row, spec, coefs) + lead + 0.1 * x[(i, 1)] + 0.1 * x[(i, 4)]
    }))
}

pub fn gen_outcome(
    t: &DMatrix<f64>,
    x: &DMatrix<f64>,
    spec: OutcomeSpec,
    coefs: &TrueCoefficients,
    seed: u64,
) -> Result<DVector<f64>> {
    let noise = standard_normals(t.nrows(), 1, seed, StreamTag::OutcomeNoise);
    Ok(outcome_mean(t, x, spec, coefs)? + noise.column(0) * OUTCOME_NOISE_SD)
}

/// Which process to draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub treatment_model: TreatmentModel,
    pub outcome_spec: OutcomeSpec,
    pub true_coefficients: TrueCoefficients,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            treatment_model: TreatmentModel::T2dL,
            outcome_spec: OutcomeSpec::Y1,
            true_coefficients: TrueCoefficients::default(),
        }
    }
}

/// Seeds used for one replication's draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicationSeeds {
    pub covariates: u64,
    pub treatments: u64,
    pub outcomes: u64,
}

impl ReplicationSeeds {
    pub fn derive(master: u64, replication: u64) -> Self {
        Self {
            covariates: subseed(master, replication, StreamTag::Covariates),
            treatments: subseed(master, replication, StreamTag::TreatmentNoise),
            outcomes: subseed(master, replication, StreamTag::OutcomeNoise),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sample: Sample,
    /// `E[Y(T_i)]` at each unit's observed treatment.
    pub true_effects: DVector<f64>,
}

/// Draws replication `replication` of `spec` at size `n`.
pub fn generate(
    spec: &DataSpec,
    n: usize,
    master_seed: u64,
    replication: u64,
) -> Result<SimulatedData> {
    let seeds = ReplicationSeeds::derive(master_seed, replication);
    let x = gen_covariates(n, seeds.covariates);
    let t = gen_treatments(&x, spec.treatment_model, seeds.treatments)?;
    let y = gen_outcome(
        &t,
        &x,
        spec.outcome_spec,
        &spec.true_coefficients,
        seeds.outcomes,
    )?;
    let mut row = vec![0.0; t.ncols()];
    let true_effects = DVector::from_fn(n, |i, _| {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = t[(i, k)];
        }
        true_effect(&row, spec.outcome_spec, &spec.true_coefficients)
    });
    Ok(SimulatedData {
        sample: Sample::new(y, t, x)?,
        true_effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn factor_reproduces_covariance() {
        let l = covariate_factor();
        let s = &l * l.transpose();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.2 };
                assert_abs_diff_eq!(s[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_covariates_zero_treatments() {
        let x = DMatrix::zeros(3, 5);
        for m in [TreatmentModel::T2dL, TreatmentModel::T2dNL] {
            assert_eq!(treatment_mean(&x, m).unwrap(), DMatrix::zeros(3, 2));
        }
    }

    #[test]
    fn first_unit_vector() {
        let mut x = DMatrix::zeros(1, 5);
        x[(0, 0)] = 1.0;
        let lin = treatment_mean(&x, TreatmentModel::T2dL).unwrap();
        assert_eq!(lin.as_slice(), &[1.0, 1.0]);
        let nl = treatment_mean(&x, TreatmentModel::T2dNL).unwrap();
        assert_eq!(nl.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn outcome_formulas() {
        let c = TrueCoefficients::default();
        let x = DMatrix::zeros(1, 5);
        let zero_t = DMatrix::zeros(1, 2);
        for spec in [OutcomeSpec::Y1, OutcomeSpec::Y2, OutcomeSpec::Y3] {
            assert_eq!(outcome_mean(&zero_t, &x, spec, &c).unwrap()[0], 0.0);
        }
        for spec in [OutcomeSpec::Y4, OutcomeSpec::Y5, OutcomeSpec::Y6] {
            assert_eq!(outcome_mean(&zero_t, &x, spec, &c).unwrap()[0], 1.0);
        }
        let ones = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert_abs_diff_eq!(
            outcome_mean(&ones, &x, OutcomeSpec::Y2, &c).unwrap()[0],
            2.2,
            epsilon = 1e-15
        );
        let t = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        assert_eq!(outcome_mean(&t, &x, OutcomeSpec::Y3, &c).unwrap()[0], 10.0);
    }

    #[test]
    fn coefficient_overrides() {
        let mut o = BTreeMap::new();
        o.insert("t2".to_string(), 0.8);
        let c = TrueCoefficients::with_overrides(&o);
        let t = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = outcome_mean(&t, &DMatrix::zeros(1, 5), OutcomeSpec::Y1, &c).unwrap();
        assert_abs_diff_eq!(y[0], 1.8, epsilon = 1e-15);
    }

    #[test]
    fn same_seed_same_draw() {
        assert_eq!(gen_covariates(20, 9), gen_covariates(20, 9));
        assert_ne!(gen_covariates(20, 9), gen_covariates(20, 10));
    }
}
