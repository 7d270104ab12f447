//! Tensor-product B-spline regression for the effect surface `s(t)`.
//!
//! Each treatment dimension gets `M = m + r` B-splines of order `r` on a knot
//! vector with `r`-fold boundary knots and `m` interior knots. The tensor basis
//! holds all `Q = M^p` products, indexed lexicographically with the first
//! dimension varying slowest.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::parametric::normalized_weights;

/// Relative slack when evaluating just outside the knot range.
pub const CLAMP_TOLERANCE: f64 = 1e-9;
const MIN_SINGULAR_VALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnotPlacement {
    #[default]
    Uniform,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    /// Interior knots per dimension (`m`).
    pub interior_knots: usize,
    /// Order `r` (degree + 1).
    pub order: usize,
    #[serde(default)]
    pub placement: KnotPlacement,
    /// Per-dimension support; defaults to the observed range widened by
    /// [`CLAMP_TOLERANCE`] on each side.
    #[serde(default)]
    pub ranges: Option<Vec<(f64, f64)>>,
}

impl SplineConfig {
    pub fn new(interior_knots: usize, order: usize) -> Self {
        Self {
            interior_knots,
            order,
            placement: KnotPlacement::Uniform,
            ranges: None,
        }
    }

    /// Cubic splines with `m = ceil(n^(1/(2p+1)))`, reduced until
    /// `(m + 4)^p <= n / 5`.
    pub fn default_for(n: usize, p: usize) -> Self {
        let order = 4;
        let mut m = (n as f64).powf(1.0 / (2 * p + 1) as f64).ceil() as usize;
        while m > 0 && ((m + order) as f64).powi(p as i32) > n as f64 / 5.0 {
            m -= 1;
        }
        Self::new(m, order)
    }

    pub fn basis_per_dim(&self) -> usize {
        self.interior_knots + self.order
    }

    pub fn tensor_size(&self, p: usize) -> usize {
        self.basis_per_dim().pow(p as u32)
    }
}

/// Extended knot vector for one treatment dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    order: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn uniform(interior: usize, order: usize, lower: f64, upper: f64) -> Result<Self> {
        let inner: Vec<f64> = (1..=interior)
            .map(|i| lower + (upper - lower) * i as f64 / (interior + 1) as f64)
            .collect();
        Self::with_interior(order, lower, upper, inner)
    }

    /// Interior knots at the empirical `i / (m + 1)` quantiles of `data`.
    pub fn quantile(
        interior: usize,
        order: usize,
        lower: f64,
        upper: f64,
        data: &[f64],
    ) -> Result<Self> {
        let mut sorted: Vec<f64> = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let last = sorted.len().saturating_sub(1) as f64;
        let inner: Vec<f64> = (1..=interior)
            .map(|i| {
                let pos = last * i as f64 / (interior + 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
            })
            .collect();
        Self::with_interior(order, lower, upper, inner)
    }

    fn with_interior(order: usize, lower: f64, upper: f64, inner: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig(
                "spline order must be at least 1".into(),
            ));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid spline range [{lower}, {upper}]"
            )));
        }
        let mut knots = vec![lower; order];
        knots.extend(inner);
        knots.extend(std::iter::repeat_n(upper, order));
        Ok(Self { order, knots })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn clamp(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let slack = CLAMP_TOLERANCE * (hi - lo).max(1.0);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfRange {
                value: t,
                lower: lo,
                upper: hi,
            });
        }
        Ok(t.clamp(lo, hi))
    }

    /// Index `l` of the knot span `[k_l, k_{l+1})` holding `t`, with the right
    /// endpoint assigned to the last non-empty span.
    fn span(&self, t: f64) -> usize {
        let r = self.order;
        let last = self.len() - 1;
        if t >= self.knots[last + 1] {
            return last;
        }
        let interior = &self.knots[r..=last];
        (r - 1 + interior.partition_point(|k| *k <= t)).min(last)
    }

    /// Values of the `order` basis functions that can be nonzero at `t`,
    /// together with the index of the first one.
    pub fn local(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        let t = self.clamp(t)?;
        let degree = self.order - 1;
        let l = self.span(t);
        let k = &self.knots;
        let mut values = vec![0.0; self.order];
        let mut left = vec![0.0; self.order];
        let mut right = vec![0.0; self.order];
        values[0] = 1.0;
        for j in 1..=degree {
            left[j] = t - k[l + 1 - j];
            right[j] = k[l + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((l - degree, values))
    }

    /// All `M` basis values at `t`.
    pub fn evaluate(&self, t: f64) -> Result<DVector<f64>> {
        let (first, values) = self.local(t)?;
        let mut out = DVector::zeros(self.len());
        for (offset, v) in values.into_iter().enumerate() {
            out[first + offset] = v;
        }
        Ok(out)
    }
}

/// Tensor-product basis over all treatment dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBasis {
    dims: Vec<KnotVector>,
}

impl TensorBasis {
    pub fn new(dims: Vec<KnotVector>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidConfig(
                "tensor basis needs at least one dimension".into(),
            ));
        }
        Ok(Self { dims })
    }

    /// Knot vectors from a config and the observed treatments.
    pub fn from_data(config: &SplineConfig, treatments: &DMatrix<f64>) -> Result<Self> {
        let p = treatments.ncols();
        if let Some(r) = &config.ranges {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
        }
        let dims = (0..p)
            .map(|k| {
                let col: Vec<f64> = treatments.column(k).iter().copied().collect();
                let (lo, hi) = match &config.ranges {
                    Some(r) => r[k],
                    None => {
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (lo - CLAMP_TOLERANCE, hi + CLAMP_TOLERANCE)
                    }
                };
                match config.placement {
                    KnotPlacement::Uniform => {
                        KnotVector::uniform(config.interior_knots, config.order, lo, hi)
                    }
                    KnotPlacement::Quantile => {
                        KnotVector::quantile(config.interior_knots, config.order, lo, hi, &col)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[KnotVector] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.dims.iter().map(KnotVector::len).product()
    }

    /// Nonzero tensor entries at `t` as `(index, value)` pairs.
    fn local(&self, t: &[f64]) -> Result<Vec<(usize, f64)>> {
        if t.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                actual: t.len(),
            });
        }
        let mut acc = vec![(0usize, 1.0f64)];
        for (dim, &tj) in self.dims.iter().zip(t) {
            let (first, values) = dim.local(tj)?;
            let m = dim.len();
            acc = acc
                .iter()
                .flat_map(|&(idx, val)| {
                    values
                        .iter()
                        .enumerate()
                        .map(move |(off, v)| (idx * m + first + off, val * v))
                })
                .collect();
        }
        Ok(acc)
    }

    pub fn evaluate(&self, t: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.size());
        for (idx, v) in self.local(t)? {
            out[idx] += v;
        }
        Ok(out)
    }

    /// Basis matrix with one row per unit.
    pub fn design(&self, treatments: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut z = DMatrix::zeros(treatments.nrows(), self.size());
        let mut row = vec![0.0; treatments.ncols()];
        for i in 0..treatments.nrows() {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = treatments[(i, k)];
            }
            for (idx, v) in self.local(&row)? {
                z[(i, idx)] += v;
            }
        }
        Ok(z)
    }
}

/// One-dimensional basis values; a thin wrapper over [`KnotVector`].
pub fn bspline_basis_1d(t: f64, config: &SplineConfig, range: (f64, f64)) -> Result<DVector<f64>> {
    KnotVector::uniform(config.interior_knots, config.order, range.0, range.1)?.evaluate(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub coefficients: DVector<f64>,
    pub basis: TensorBasis,
    /// Smallest singular value of `Z'Z / n`.
    pub min_singular_value: f64,
}

impl SplineFit {
    pub fn predict(&self, t: &[f64]) -> Result<f64> {
        Ok(self
            .basis
            .local(t)?
            .into_iter()
            .map(|(idx, v)| v * self.coefficients[idx])
            .sum())
    }
}

/// `beta = (Z'Z)^-1 Z' diag(n w) Y`.
///
/// The weights are rescaled to sum to one and multiplied by `n`, so uniform
/// weights give ordinary least squares on the tensor basis.
pub fn fit_spline(sample: &Sample, weights: &[f64], config: &SplineConfig) -> Result<SplineFit> {
    let n = sample.n();
    let w = normalized_weights(weights, n)?;
    let basis = TensorBasis::from_data(config, sample.treatments())?;
    let q = basis.size();
    if q >= n {
        return Err(Error::InvalidConfig(format!(
            "spline basis has {q} functions but only {n} units"
        )));
    }
    let z = basis.design(sample.treatments())?;
    let gram = z.tr_mul(&z);
    let scaled = &gram / n as f64;
    let min_singular_value = scaled
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_singular_value > MIN_SINGULAR_VALUE) {
        return Err(Error::IllConditionedBasis { min_singular_value });
    }
    let response = DVector::from_fn(n, |i, _| n as f64 * w[i] * sample.outcomes()[i]);
    let rhs = z.tr_mul(&response);
    let coefficients = gram
        .cholesky()
        .ok_or(Error::IllConditionedBasis { min_singular_value })?
        .solve(&rhs);
    Ok(SplineFit {
        coefficients,
        basis,
        min_singular_value,
    })
}

/// [`fit_spline`], lowering the interior-knot count one step at a time while
/// the basis is ill-conditioned. Returns the fit and the count that worked.
///
/// Conditioning depends on the design only, so every weight vector on the
/// same sample ends at the same count.
pub fn fit_spline_reducing_knots(
    sample: &Sample,
    weights: &[f64],
    config: &SplineConfig,
) -> Result<(SplineFit, usize)> {
    let mut cfg = config.clone();
    loop {
        match fit_spline(sample, weights, &cfg) {
            Err(Error::IllConditionedBasis { .. }) if cfg.interior_knots > 0 => {
                cfg.interior_knots -= 1
            }
            other => return other.map(|fit| (fit, cfg.interior_knots)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn order_one_is_indicator() {
        let kv = KnotVector::uniform(3, 1, 0.0, 4.0).unwrap();
        assert_eq!(kv.len(), 4);
        assert_eq!(kv.evaluate(2.5).unwrap().as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(kv.evaluate(4.0).unwrap().as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(kv.evaluate(0.0).unwrap().as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn partition_of_unity_at_endpoints() {
        for order in 1..=5 {
            let kv = KnotVector::uniform(3, order, -1.0, 2.0).unwrap();
            for t in [-1.0, -0.3, 0.0, 0.5, 1.999, 2.0] {
                assert_abs_diff_eq!(kv.evaluate(t).unwrap().sum(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn out_of_range_refused() {
        let kv = KnotVector::uniform(2, 3, 0.0, 1.0).unwrap();
        assert!(kv.evaluate(1.0 + 1e-12).is_ok());
        assert!(matches!(kv.evaluate(1.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(
            kv.evaluate(f64::NAN),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn tensor_order_one_single_entry() {
        let dims = vec![
            KnotVector::uniform(2, 1, 0.0, 3.0).unwrap(),
            KnotVector::uniform(2, 1, 0.0, 3.0).unwrap(),
        ];
        let tb = TensorBasis::new(dims).unwrap();
        let b = tb.evaluate(&[1.5, 2.5]).unwrap();
        assert_eq!(b.len(), 9);
        // cells (1, 2) in row-major order
        assert_eq!(b[5], 1.0);
        assert_eq!(b.sum(), 1.0);
    }

    #[test]
    fn default_rule() {
        let c = SplineConfig::default_for(500, 2);
        assert_eq!((c.interior_knots, c.order), (4, 4));
        assert_eq!(SplineConfig::default_for(2000, 2).interior_knots, 5);
        // cap Q <= n/5
        let small = SplineConfig::default_for(100, 2);
        assert!(small.tensor_size(2) <= 20);
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let tb = TensorBasis::new(vec![KnotVector::uniform(1, 2, 0.0, 1.0).unwrap()]).unwrap();
        let fit = SplineFit {
            coefficients: DVector::zeros(tb.size()),
            basis: tb,
            min_singular_value: 1.0,
        };
        assert_eq!(fit.predict(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn too_many_knots_flagged() {
        // all units in one cell leaves the other basis functions empty
        let t = DMatrix::from_fn(40, 1, |i, _| if i == 39 { 10.0 } else { i as f64 * 1e-3 });
        let s = Sample::new(
            DVector::from_element(40, 1.0),
            t,
            DMatrix::from_fn(40, 1, |i, _| i as f64),
        )
        .unwrap();
        let err = fit_spline(&s, &[1.0; 40], &SplineConfig::new(8, 2)).unwrap_err();
        assert!(matches!(err, Error::IllConditionedBasis { .. }));
        let (fit, m) = fit_spline_reducing_knots(&s, &[1.0; 40], &SplineConfig::new(8, 2)).unwrap();
        assert!(m < 8);
        assert_abs_diff_eq!(fit.predict(&[5.0]).unwrap(), 1.0, epsilon = 1e-9);
    }
}
