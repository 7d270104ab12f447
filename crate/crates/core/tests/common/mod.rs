#![allow(dead_code)]

use ebmt::data::Sample;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Treatments that depend linearly on the covariates, plus noise.
pub fn confounded_sample(rng: &mut ChaCha8Rng, n: usize, p: usize, q: usize) -> Sample {
    let x = normal_matrix(rng, n, q);
    let noise = normal_matrix(rng, n, p);
    let load = DMatrix::from_fn(q, p, |j, k| 0.3 / (1.0 + (j + k) as f64));
    let t = &x * load + noise;
    let y = DVector::from_fn(n, |i, _| {
        t.row(i).sum() + x[(i, 0)] + {
            let e: f64 = StandardNormal.sample(rng);
            e
        }
    });
    Sample::new(y, t, x).unwrap()
}
