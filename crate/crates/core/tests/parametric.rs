#![allow(clippy::needless_range_loop)]

mod common;

use ebmt::parametric::{fit_parametric, sandwich_variance, Rcam};
use ebmt::prelude::*;
use ebmt::simulation::{generate, DataSpec};
use nalgebra::{DMatrix, DVector};

fn line_sample(t: &[f64], y: &[f64]) -> Sample {
    let n = t.len();
    let x = DMatrix::from_fn(n, 1, |i, _| (i as f64 * 1.3).sin());
    Sample::new(
        DVector::from_column_slice(y),
        DMatrix::from_column_slice(n, 1, t),
        x,
    )
    .unwrap()
}

#[test]
fn weighted_fit_matches_grid_minimum() {
    let t = [-1.0, 0.2, 0.9, 1.7];
    let y = [-0.8, 1.1, 1.4, 2.9];
    let w = [0.1, 0.4, 0.3, 0.2];
    let sample = line_sample(&t, &y);
    let model = LinearEffectModel::main_effects(1).unwrap();
    let fit = fit_parametric(&sample, &w, &model).unwrap();

    let loss = |a: f64, b: f64| -> f64 {
        t.iter()
            .zip(&y)
            .zip(&w)
            .map(|((ti, yi), wi)| wi * (yi - a - b * ti).powi(2))
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=6000 {
        let a = -3.0 + i as f64 * 1e-3;
        for j in 0..=6000 {
            let b = -3.0 + j as f64 * 1e-3;
            let l = loss(a, b);
            if l < best.0 {
                best = (l, a, b);
            }
        }
    }
    assert!((fit.theta_hat[0] - best.1).abs() <= 1e-3);
    assert!((fit.theta_hat[1] - best.2).abs() <= 1e-3);
}

#[test]
fn sandwich_matches_entrywise_formula() {
    let t = [-1.2, -0.4, 0.1, 0.5, 1.1, 2.0];
    let y = [0.3, -0.2, 1.0, 0.4, 2.2, 1.9];
    let raw_w = [1.0, 2.0, 0.5, 1.5, 1.0, 3.0];
    let sample = line_sample(&t, &y);
    let model = LinearEffectModel::main_effects(1).unwrap();
    let fit = fit_parametric(&sample, &raw_w, &model).unwrap();
    let v = sandwich_variance(&sample, &raw_w, &model, &fit.theta_hat).unwrap();

    let n = 6.0;
    let total: f64 = raw_w.iter().sum();
    let (a, b) = (fit.theta_hat[0], fit.theta_hat[1]);
    let mut u = [[0.0; 2]; 2];
    let mut m = [[0.0; 2]; 2];
    for i in 0..6 {
        let w = raw_w[i] / total;
        let phi = [1.0, t[i]];
        let r = y[i] - a - b * t[i];
        for j in 0..2 {
            for k in 0..2 {
                u[j][k] += w * phi[j] * phi[k] / n;
                m[j][k] += w * w * r * r * phi[j] * phi[k] / n;
            }
        }
    }
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let inv = [
        [u[1][1] / det, -u[0][1] / det],
        [-u[1][0] / det, u[0][0] / det],
    ];
    for j in 0..2 {
        for k in 0..2 {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += inv[j][a] * m[a][b] * inv[b][k];
                }
            }
            assert!(
                (v[(j, k)] - s).abs() <= 1e-10 * s.abs().max(1.0),
                "{j}{k}: {} vs {s}",
                v[(j, k)]
            );
        }
    }
}

#[test]
fn exact_outcomes_give_zero_width_bootstrap() {
    let mut rng = common::rng(5);
    let noisy = common::confounded_sample(&mut rng, 200, 2, 3);
    let t = noisy.treatments().clone();
    let y = DVector::from_fn(200, |i, _| 0.5 + 2.0 * t[(i, 0)] - t[(i, 1)]);
    let sample = Sample::new(y, t, noisy.covariates().clone()).unwrap();
    let ebmt = Ebmt::new(LinearEffectModel::main_effects(2).unwrap());
    let boot = bootstrap_ci(&sample, &ebmt, &BootstrapConfig::new(50, 0.9, 3)).unwrap();
    for ci in &boot.intervals {
        assert!(ci.width() < 1e-10);
    }
    assert!((boot.intervals[1].lower - 2.0).abs() < 1e-10);
}

#[test]
fn bootstrap_is_reproducible() {
    let data = generate(&DataSpec::default(), 300, 4, 0).unwrap();
    let ebmt = Ebmt::new(LinearEffectModel::main_effects(2).unwrap());
    let cfg = BootstrapConfig::new(60, 0.9, 77);
    let a = bootstrap_ci(&data.sample, &ebmt, &cfg).unwrap();
    let b = bootstrap_ci(&data.sample, &ebmt, &cfg).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_ci(&data.sample, &ebmt, &BootstrapConfig::new(60, 0.9, 78)).unwrap();
    assert_ne!(a.intervals, c.intervals);
}

#[test]
fn wald_and_bootstrap_widths_agree() {
    let ebmt = Ebmt::new(LinearEffectModel::main_effects(2).unwrap());
    let reps = 20;
    let mut wald_width = [0.0; 3];
    let mut boot_width = [0.0; 3];
    for rep in 0..reps {
        let data = generate(&DataSpec::default(), 1000, 2024, rep).unwrap();
        let wald = ebmt.estimate(&data.sample, 0.95).unwrap().wald_ci.unwrap();
        let boot =
            bootstrap_ci(&data.sample, &ebmt, &BootstrapConfig::new(300, 0.95, rep)).unwrap();
        for j in 0..3 {
            wald_width[j] += wald[j].width();
            boot_width[j] += boot.intervals[j].width();
        }
    }
    for j in 1..3 {
        let ratio = wald_width[j] / boot_width[j];
        assert!(
            (ratio - 1.0).abs() < 0.2,
            "term {j}: mean wald/bootstrap width ratio {ratio}"
        );
    }
}

#[test]
fn estimates_do_not_depend_on_row_order() {
    let data = generate(&DataSpec::default(), 400, 12, 0).unwrap();
    let n = data.sample.n();
    let perm: Vec<usize> = (0..n).rev().collect();
    let shuffled = data.sample.select(&perm).unwrap();
    let model = LinearEffectModel::main_effects(2).unwrap();
    for est in [
        Box::new(Ebmt::new(model.clone())) as Box<dyn EffectEstimator>,
        Box::new(Rcam::new(model.clone())),
        Box::new(Ebut::new(model.clone())),
    ] {
        let a = est.estimate(&data.sample, 0.95).unwrap();
        let b = est.estimate(&shuffled, 0.95).unwrap();
        assert!((a.theta_hat - b.theta_hat).amax() < 1e-10);
    }
}

#[test]
fn estimator_concentrates_as_n_grows() {
    let model = LinearEffectModel::main_effects(2).unwrap();
    let ebmt = Ebmt::new(model);
    let median_error = |n: usize| {
        let mut errs: Vec<f64> = (0..200)
            .map(|rep| {
                let data = generate(&DataSpec::default(), n, 555, rep).unwrap();
                (ebmt.point_estimate(&data.sample).unwrap().theta_hat[1] - 1.0).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        (errs[99] + errs[100]) / 2.0
    };
    let small = median_error(250);
    let large = median_error(2000);
    assert!(
        large < small,
        "median |error| {large} at n = 2000 vs {small} at n = 250"
    );
}
