//! Covariate balance via the multivariate regression of treatments on
//! covariates.
//!
//! `lambda` is Wilks' ratio `|SSE| / |SSE + SSH|`. Under normal errors the
//! likelihood ratio for `H0: B = 0` is `lambda^(n/2)`, so the reported
//! `-2 log` of that ratio is `-n log(lambda)`, referred to a chi-square with
//! `q * p` degrees of freedom. Small values mean the covariates explain little
//! of the treatments.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::linalg::{log_det_spd, symmetrize};
use crate::parametric::normalized_weights;

pub const WEIGHTED_CAVEAT: &str =
    "weighted statistic; the chi-square reference distribution is approximate under weighting";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// `q x p` regression coefficients.
    pub coefficients: DMatrix<f64>,
    pub sse: DMatrix<f64>,
    pub ssh: DMatrix<f64>,
    /// Wilks' ratio `|SSE| / |SSE + SSH|`, in `(0, 1]`.
    pub lambda: f64,
    /// `log(lambda)`, kept separately since `lambda` rounds to 1 near balance.
    pub log_lambda: f64,
    /// Likelihood-ratio statistic `-n log(lambda)`.
    pub minus_two_log_lambda: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub weighted: bool,
    pub caveat: Option<String>,
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom, through the regularized upper incomplete gamma function.
pub fn chi_square_upper_tail(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0)
}

fn row_order(sample: &Sample, w: &DVector<f64>) -> Vec<usize> {
    let t = sample.treatments();
    let x = sample.covariates();
    let key = |i: usize| {
        t.row(i)
            .iter()
            .chain(x.row(i).iter())
            .copied()
            .chain(std::iter::once(w[i]))
            .collect::<Vec<f64>>()
    };
    let keys: Vec<Vec<f64>> = (0..sample.n()).map(key).collect();
    let mut order: Vec<usize> = (0..sample.n()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    order
}

/// Balance statistic, optionally under weights.
///
/// Treatments and covariates are centered at their (weighted) means before
/// the cross products are formed, and every sum `sum(.)` becomes
/// `sum n w_i (.)` under weights. For standardized data without weights this
/// is exactly `B = (X'X)^-1 X'T`, `SSE = T'T - B'X'T`,
/// `SSH = B'X'T - n Tbar Tbar'`. Units are visited in a canonical order, so
/// the report does not depend on row order.
pub fn balance_test(sample: &Sample, weights: Option<&[f64]>) -> Result<BalanceReport> {
    let (n, p, q) = (sample.n(), sample.p(), sample.q());
    if n <= p + q {
        return Err(Error::InvalidSample(format!(
            "balance test needs more than p + q = {} units, got {n}",
            p + q
        )));
    }
    let w = match weights {
        Some(w) => normalized_weights(w, n)?,
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let order = row_order(sample, &w);
    let t = sample.treatments();
    let x = sample.covariates();

    let mut t_bar = DVector::zeros(p);
    let mut x_bar = DVector::zeros(q);
    for &i in &order {
        t_bar += t.row(i).transpose() * w[i];
        x_bar += x.row(i).transpose() * w[i];
    }

    let mut sxx = DMatrix::zeros(q, q);
    let mut sxt = DMatrix::zeros(q, p);
    let mut stt = DMatrix::zeros(p, p);
    for &i in &order {
        let c = n as f64 * w[i];
        let xc = x.row(i).transpose() - &x_bar;
        let tc = t.row(i).transpose() - &t_bar;
        sxx += &xc * xc.transpose() * c;
        sxt += &xc * tc.transpose() * c;
        stt += &tc * tc.transpose() * c;
    }
    let sxx = symmetrize(&sxx);
    let stt = symmetrize(&stt);

    let chol = sxx.cholesky().ok_or(Error::SingularCrossProduct)?;
    let coefficients = chol.solve(&sxt);
    let ssh = symmetrize(&(coefficients.transpose() * &sxt));
    let sse = symmetrize(&(&stt - &ssh));

    let log_sse = log_det_spd(&sse).ok_or(Error::SingularCrossProduct)?;
    let log_total = log_det_spd(&stt).ok_or(Error::SingularCrossProduct)?;
    let log_lambda = (log_sse - log_total).min(0.0);
    let minus_two_log_lambda = 0.0 - n as f64 * log_lambda;
    let degrees_of_freedom = q * p;
    Ok(BalanceReport {
        coefficients,
        sse,
        ssh,
        lambda: log_lambda.exp(),
        log_lambda,
        minus_two_log_lambda,
        degrees_of_freedom,
        p_value: chi_square_upper_tail(minus_two_log_lambda, degrees_of_freedom),
        weighted: weights.is_some(),
        caveat: weights.map(|_| WEIGHTED_CAVEAT.to_string()),
    })
}
