use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimators::EffectEstimator;
use super::fit::{BootstrapSummary, Interval};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, level: f64, seed: u64) -> Self {
        Self {
            replicates,
            level,
            seed,
        }
    }
}

/// One-based order-statistic positions `(ceil(a B), floor((1 - a) B))` with
/// `a = (1 - level) / 2`.
pub fn percentile_ranks(b: usize, level: f64) -> (usize, usize) {
    let tail = (1.0 - level) / 2.0;
    let lower = ((tail * b as f64) - 1e-9).ceil().max(1.0) as usize;
    let upper = (((1.0 - tail) * b as f64) + 1e-9).floor().min(b as f64) as usize;
    (lower, upper.max(lower))
}

/// Percentile bootstrap. Each replicate resamples `n` units with replacement
/// and reruns the complete estimation pipeline (standardization and weight
/// solving included). Replicate `b` draws from its own keyed stream, so the
/// result does not depend on the thread count.
///
/// Replicates whose pipeline fails are skipped; more than 5% failures is an
/// error.
pub fn bootstrap_ci<E: EffectEstimator + ?Sized>(
    sample: &Sample,
    estimator: &E,
    config: &BootstrapConfig,
) -> Result<BootstrapSummary> {
    let b = config.replicates;
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::InvalidBootstrap(format!(
            "level {} outside (0, 1)",
            config.level
        )));
    }
    if (b as f64) * (1.0 - config.level) < 2.0 - 1e-9 {
        return Err(Error::InvalidBootstrap(format!(
            "{b} replicates are too few for a {} interval",
            config.level
        )));
    }
    let n = sample.n();
    let draws: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(config.seed, rep as u64, StreamTag::Resample);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resampled = sample.select(&idx).ok()?;
            estimator
                .point_estimate(&resampled)
                .ok()
                .map(|est| est.theta_hat.iter().copied().collect())
        })
        .collect();

    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed * 20 > b {
        return Err(Error::TooManyFailedResamples { failed, total: b });
    }
    let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    let effective = ok.len();
    let j = estimator.model().len();
    let (lo, hi) = percentile_ranks(effective, config.level);

    let mut intervals = Vec::with_capacity(j);
    let mut standard_errors = Vec::with_capacity(j);
    for coef in 0..j {
        let mut values: Vec<f64> = ok.iter().map(|v| v[coef]).collect();
        let mean = values.iter().sum::<f64>() / effective as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (effective as f64 - 1.0).max(1.0);
        standard_errors.push(var.sqrt());
        values.sort_by(f64::total_cmp);
        intervals.push(Interval {
            lower: values[lo - 1],
            upper: values[hi - 1],
        });
    }
    Ok(BootstrapSummary {
        level: config.level,
        intervals,
        standard_errors,
        requested: b,
        effective,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_for_common_sizes() {
        assert_eq!(percentile_ranks(200, 0.95), (5, 195));
        assert_eq!(percentile_ranks(500, 0.95), (13, 487));
        assert_eq!(percentile_ranks(40, 0.95), (1, 39));
        assert_eq!(percentile_ranks(1000, 0.95), (25, 975));
    }
}
