//! Compare covariate balance before and after weighting.

use ebmt::prelude::*;
use ebmt::simulation::{DataSpec, TreatmentModel};

pub fn run_example() -> ebmt::Result<()> {
    for model in [TreatmentModel::T2dL, TreatmentModel::T2dNL] {
        let spec = DataSpec {
            treatment_model: model,
            ..DataSpec::default()
        };
        let data = simulation::generate(&spec, 1000, 21, 0)?;
        let before = balance_test(&data.sample, None)?;
        let (solution, ..) =
            Ebmt::new(LinearEffectModel::main_effects(2)?).weights(&data.sample)?;
        let after = balance_test(&data.sample, Some(solution.weights.as_slice()))?;
        println!("{model:?}");
        println!(
            "  unweighted: -2 log lambda {:9.3}  df {}  p {:.3e}",
            before.minus_two_log_lambda, before.degrees_of_freedom, before.p_value
        );
        println!(
            "  weighted:   -2 log lambda {:9.3e}  p {:.3}",
            after.minus_two_log_lambda, after.p_value
        );
    }
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
