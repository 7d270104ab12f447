//! Estimate a nonlinear effect surface with a tensor-product B-spline under
//! balancing weights.

use ebmt::prelude::*;
use ebmt::simulation::{DataSpec, OutcomeSpec};
use ebmt::spline::fit_spline_reducing_knots;

pub fn run_example() -> ebmt::Result<()> {
    let spec = DataSpec {
        outcome_spec: OutcomeSpec::Y3,
        ..DataSpec::default()
    };
    let data = simulation::generate(&spec, 1000, 5, 0)?;
    let weights = Ebmt::new(LinearEffectModel::main_effects(2)?)
        .weights(&data.sample)?
        .0
        .weights;

    let config = SplineConfig::default_for(data.sample.n(), data.sample.p());
    let (fit, m) = fit_spline_reducing_knots(&data.sample, weights.as_slice(), &config)?;
    println!(
        "interior knots {m} (rule asked for {}), basis size {}",
        config.interior_knots,
        fit.basis.size()
    );

    let t = data.sample.treatments();
    let mse = (0..data.sample.n())
        .map(|i| {
            let row = [t[(i, 0)], t[(i, 1)]];
            (fit.predict(&row).unwrap() - data.true_effects[i]).powi(2)
        })
        .sum::<f64>()
        / data.sample.n() as f64;
    println!("in-sample RMSE against the true surface: {:.3}", mse.sqrt());

    for point in [[-1.0, -1.0], [0.0, 0.0], [1.0, 1.0], [1.0, -1.0]] {
        println!(
            "s({:4.1}, {:4.1}) = {:7.3}",
            point[0],
            point[1],
            fit.predict(&point)?
        );
    }
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
