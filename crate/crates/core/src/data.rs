//! Observed data, standardization, and the balance-feature matrix.
//!
//! The balance features for unit `i` are laid out as
//!
//! ```text
//! [ vec(T_i X_i')  |  T_i  |  X_i ]
//!   p*q columns       p       q
//! ```
//!
//! where `vec` stacks the `p x q` outer product column by column, so the
//! interaction `T_k X_j` (zero-based) sits at column `k + p * j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Block, Error, Result};

/// Observed triples `(Y_i, T_i, X_i)` for `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    outcomes: DVector<f64>,
    treatments: DMatrix<f64>,
    covariates: DMatrix<f64>,
}

impl Sample {
    pub fn new(
        outcomes: DVector<f64>,
        treatments: DMatrix<f64>,
        covariates: DMatrix<f64>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if n < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 units, got {n}"
            )));
        }
        if treatments.nrows() != n || covariates.nrows() != n {
            return Err(Error::InvalidSample(format!(
                "row counts differ: outcomes {n}, treatments {}, covariates {}",
                treatments.nrows(),
                covariates.nrows()
            )));
        }
        if treatments.ncols() == 0 || covariates.ncols() == 0 {
            return Err(Error::InvalidSample(
                "need at least one treatment and one covariate column".into(),
            ));
        }
        let finite = outcomes.iter().all(|v| v.is_finite())
            && treatments.iter().all(|v| v.is_finite())
            && covariates.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidSample("non-finite value in sample".into()));
        }
        Ok(Self {
            outcomes,
            treatments,
            covariates,
        })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn p(&self) -> usize {
        self.treatments.ncols()
    }

    pub fn q(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcomes(&self) -> &DVector<f64> {
        &self.outcomes
    }

    pub fn treatments(&self) -> &DMatrix<f64> {
        &self.treatments
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    /// Rows picked by `indices`, repeats allowed (bootstrap resampling).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let outcomes =
            DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.outcomes[i]));
        let treatments = self.treatments.select_rows(indices);
        let covariates = self.covariates.select_rows(indices);
        Self::new(outcomes, treatments, covariates)
    }

    /// Same units with only the listed treatment columns kept.
    pub fn with_treatment_columns(&self, columns: &[usize]) -> Result<Self> {
        Self::new(
            self.outcomes.clone(),
            self.treatments.select_columns(columns),
            self.covariates.clone(),
        )
    }
}

/// Column means and standard deviations used to standardize a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationTransform {
    pub treatment_means: Vec<f64>,
    pub treatment_sds: Vec<f64>,
    pub covariate_means: Vec<f64>,
    pub covariate_sds: Vec<f64>,
    /// Outcomes are left on their original scale.
    pub outcomes_centered: bool,
}

impl StandardizationTransform {
    pub fn apply_treatments(&self, treatments: &DMatrix<f64>) -> DMatrix<f64> {
        scale_columns(treatments, &self.treatment_means, &self.treatment_sds)
    }

    pub fn apply_covariates(&self, covariates: &DMatrix<f64>) -> DMatrix<f64> {
        scale_columns(covariates, &self.covariate_means, &self.covariate_sds)
    }

    pub fn invert_treatments(&self, standardized: &DMatrix<f64>) -> DMatrix<f64> {
        unscale_columns(standardized, &self.treatment_means, &self.treatment_sds)
    }

    pub fn invert_covariates(&self, standardized: &DMatrix<f64>) -> DMatrix<f64> {
        unscale_columns(standardized, &self.covariate_means, &self.covariate_sds)
    }

    /// Maps a standardized sample back to original units.
    pub fn invert(&self, sample: &Sample) -> Result<Sample> {
        Sample::new(
            sample.outcomes.clone(),
            self.invert_treatments(&sample.treatments),
            self.invert_covariates(&sample.covariates),
        )
    }
}

fn scale_columns(m: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v - means[j]) / sds[j]);
    }
    out
}

fn unscale_columns(m: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = *v * sds[j] + means[j]);
    }
    out
}

/// Mean and sample standard deviation (divisor `n - 1`) of each column.
pub(crate) fn column_moments(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for col in m.column_iter() {
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        means.push(mean);
        sds.push((ss / (n - 1.0)).sqrt());
    }
    (means, sds)
}

/// Centers and scales every treatment and covariate column to mean 0 and
/// sample standard deviation 1. Outcomes are untouched.
pub fn standardize(sample: &Sample) -> Result<(Sample, StandardizationTransform)> {
    let (treatment_means, treatment_sds) = column_moments(&sample.treatments);
    let (covariate_means, covariate_sds) = column_moments(&sample.covariates);
    let degenerate = |sds: &[f64], means: &[f64]| {
        sds.iter()
            .zip(means)
            .position(|(sd, mean)| !(*sd > 1e-14 * mean.abs().max(1.0)))
    };
    if let Some(index) = degenerate(&treatment_sds, &treatment_means) {
        return Err(Error::ConstantColumn {
            block: Block::Treatment,
            index,
        });
    }
    if let Some(index) = degenerate(&covariate_sds, &covariate_means) {
        return Err(Error::ConstantColumn {
            block: Block::Covariate,
            index,
        });
    }
    let transform = StandardizationTransform {
        treatment_means,
        treatment_sds,
        covariate_means,
        covariate_sds,
        outcomes_centered: false,
    };
    let standardized = Sample {
        outcomes: sample.outcomes.clone(),
        treatments: transform.apply_treatments(&sample.treatments),
        covariates: transform.apply_covariates(&sample.covariates),
    };
    Ok((standardized, transform))
}

/// Optional extensions of the balance-feature set. Everything is off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Append sample-centered squared covariates `X_j^2 - mean(X_j^2)`,
    /// which forces the weighted second moments of each covariate to match
    /// the unweighted ones.
    #[serde(default)]
    pub squared_covariates: bool,
}

/// Balance features `G` (one row per unit) together with base weights `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceProblem {
    features: DMatrix<f64>,
    base_weights: DVector<f64>,
}

impl BalanceProblem {
    /// Builds a problem directly from a feature matrix. `base_weights` of
    /// `None` means uniform `1/n`; supplied weights are rescaled to sum to one.
    pub fn from_features(features: DMatrix<f64>, base_weights: Option<&[f64]>) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::InvalidSample("empty feature matrix".into()));
        }
        let base_weights = match base_weights {
            None => DVector::from_element(n, 1.0 / n as f64),
            Some(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: v.len(),
                    });
                }
                if let Some(index) = v.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(Error::NonpositiveBaseWeight { index });
                }
                let total: f64 = v.iter().sum();
                DVector::from_iterator(n, v.iter().map(|w| w / total))
            }
        };
        Ok(Self {
            features,
            base_weights,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn base_weights(&self) -> &DVector<f64> {
        &self.base_weights
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Number of balance features for `p` treatments and `q` covariates.
pub fn feature_dim(p: usize, q: usize) -> usize {
    p * q + p + q
}

/// Builds the balance problem from a standardized sample.
pub fn build_balance_problem(
    sample: &Sample,
    base_weights: Option<&[f64]>,
) -> Result<BalanceProblem> {
    build_balance_problem_with(sample, base_weights, FeatureOptions::default())
}

pub fn build_balance_problem_with(
    sample: &Sample,
    base_weights: Option<&[f64]>,
    options: FeatureOptions,
) -> Result<BalanceProblem> {
    let (n, p, q) = (sample.n(), sample.p(), sample.q());
    let extra = if options.squared_covariates { q } else { 0 };
    let d = feature_dim(p, q);
    let mut g = DMatrix::zeros(n, d + extra);
    let t = &sample.treatments;
    let x = &sample.covariates;
    for j in 0..q {
        for k in 0..p {
            let col = k + p * j;
            for i in 0..n {
                g[(i, col)] = t[(i, k)] * x[(i, j)];
            }
        }
    }
    g.columns_mut(p * q, p).copy_from(t);
    g.columns_mut(p * q + p, q).copy_from(x);
    if options.squared_covariates {
        for j in 0..q {
            let mean_sq = x.column(j).iter().map(|v| v * v).sum::<f64>() / n as f64;
            for i in 0..n {
                g[(i, d + j)] = x[(i, j)] * x[(i, j)] - mean_sq;
            }
        }
    }
    BalanceProblem::from_features(g, base_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(t: &[f64], x: &[f64], p: usize, q: usize) -> Sample {
        let n = t.len() / p;
        Sample::new(
            DVector::zeros(n),
            DMatrix::from_row_slice(n, p, t),
            DMatrix::from_row_slice(n, q, x),
        )
        .unwrap()
    }

    #[test]
    fn three_point_column() {
        let s = sample(&[1.0, 2.0, 3.0], &[4.0, 0.0, 5.0], 1, 1);
        let (z, tr) = standardize(&s).unwrap();
        assert_eq!(tr.treatment_means, vec![2.0]);
        assert_eq!(tr.treatment_sds, vec![1.0]);
        assert_eq!(z.treatments().as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardized_column_is_fixed_point() {
        let s = sample(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0], 1, 1);
        let (z, tr) = standardize(&s).unwrap();
        assert_abs_diff_eq!(tr.treatment_means[0], 0.0);
        assert_abs_diff_eq!(tr.treatment_sds[0], 1.0);
        assert_eq!(z, s);
    }

    #[test]
    fn constant_column_rejected() {
        let s = sample(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0], 1, 1);
        match standardize(&s) {
            Err(Error::ConstantColumn {
                block: Block::Covariate,
                index: 0,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scalar_outer_product_row() {
        let s = sample(&[2.0, 1.0], &[3.0, 1.0], 1, 1);
        let bp = build_balance_problem(&s, None).unwrap();
        assert_eq!(bp.dim(), 3);
        assert_eq!(
            bp.features().row(0).iter().copied().collect::<Vec<_>>(),
            vec![6.0, 2.0, 3.0]
        );
    }

    #[test]
    fn unit_vector_interaction_block() {
        let s = sample(&[1.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 1.0, 0.0], 2, 2);
        let bp = build_balance_problem(&s, None).unwrap();
        assert_eq!(bp.dim(), 8);
        let row: Vec<f64> = bp.features().row(0).iter().copied().collect();
        assert_eq!(&row[..4], &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(&row[4..], &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn base_weight_errors() {
        let s = sample(&[1.0, 2.0, 3.0], &[4.0, 0.0, 5.0], 1, 1);
        assert!(matches!(
            build_balance_problem(&s, Some(&[0.5, 0.5])),
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 2
            })
        ));
        assert!(matches!(
            build_balance_problem(&s, Some(&[0.5, 0.0, 0.5])),
            Err(Error::NonpositiveBaseWeight { index: 1 })
        ));
        let bp = build_balance_problem(&s, None).unwrap();
        assert_abs_diff_eq!(bp.base_weights().sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn squared_covariates_are_centered() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[1.0, -2.0, 0.5, 3.0], 1, 1);
        let bp = build_balance_problem_with(
            &s,
            None,
            FeatureOptions {
                squared_covariates: true,
            },
        )
        .unwrap();
        assert_eq!(bp.dim(), 4);
        assert_abs_diff_eq!(bp.features().column(3).sum(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sample_rejects_bad_input() {
        let bad = Sample::new(
            DVector::from_vec(vec![1.0, f64::NAN]),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
        );
        assert!(matches!(bad, Err(Error::InvalidSample(_))));
        let short = Sample::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        );
        assert!(short.is_err());
    }
}
