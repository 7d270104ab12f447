//! A small Monte Carlo study: bias, RMSE, and Wald coverage of three
//! estimators on a correctly specified scenario.

use ebmt::analysis::render_scenarios_table;
use ebmt::simulation::{run_scenario, OutcomeSpec, ScenarioConfig, TreatmentModel};

pub fn run_example() -> ebmt::Result<()> {
    let mut config = ScenarioConfig::new("example", TreatmentModel::T2dL, OutcomeSpec::Y1, 300);
    config.replications = 20;
    config.seed = 99;
    let report = run_scenario(&config)?;
    print!("{}", render_scenarios_table(std::slice::from_ref(&report)));

    let ebmt = report.method("EBMT").expect("EBMT runs by default");
    assert_eq!(ebmt.succeeded, 20);
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
