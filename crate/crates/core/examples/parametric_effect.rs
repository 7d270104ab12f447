//! Fit a main-effects dose-response model with EBMT and compare it against
//! the regression-adjustment and one-treatment-at-a-time baselines.

use ebmt::prelude::*;

pub fn run_example() -> ebmt::Result<()> {
    let data = simulation::generate(&simulation::DataSpec::default(), 1000, 3, 0)?;
    let model = LinearEffectModel::main_effects(2)?;

    let estimators: Vec<Box<dyn EffectEstimator>> = vec![
        Box::new(Ebmt::new(model.clone())),
        Box::new(Rcam::new(model.clone())),
        Box::new(Ebut::new(model)),
    ];
    for estimator in &estimators {
        let est = estimator.estimate(&data.sample, 0.95)?;
        println!("{}", estimator.method().name());
        for (j, term) in est.terms.iter().enumerate() {
            let ci = &est.wald_ci.as_ref().expect("wald requested")[j];
            println!(
                "  {term:>4}  {:8.4}  [{:.4}, {:.4}]",
                est.theta_hat[j], ci.lower, ci.upper
            );
        }
    }

    let ebmt = Ebmt::new(LinearEffectModel::main_effects(2)?);
    let boot = bootstrap_ci(&data.sample, &ebmt, &BootstrapConfig::new(100, 0.9, 1))?;
    for (term, ci) in ebmt.model.labels().iter().zip(&boot.intervals) {
        println!(
            "EBMT bootstrap 90% {term}: [{:.4}, {:.4}]",
            ci.lower, ci.upper
        );
    }
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
