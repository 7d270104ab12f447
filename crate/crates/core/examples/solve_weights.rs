//! Solve for entropy-balancing weights on a simulated sample and check the
//! moment conditions they satisfy.

use ebmt::prelude::*;

pub fn run_example() -> ebmt::Result<()> {
    let data = simulation::generate(&simulation::DataSpec::default(), 500, 11, 0)?;
    let (standardized, _) = standardize(&data.sample)?;
    let problem = build_balance_problem(&standardized, None)?;
    let solution = solve_weights(&problem, &SolverConfig::default())?;

    let w = &solution.weights;
    let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    println!(
        "converged: {} after {} iterations",
        solution.converged, solution.iterations
    );
    println!("dual objective: {:.6}", solution.objective);
    println!("max |sum w g|: {:.3e}", solution.constraint_residual);
    println!(
        "weights: min {:.3e}, max {:.3e}, effective sample size {:.1}",
        w.min(),
        w.max(),
        ess
    );
    assert!(solution.converged);
    assert!(solution.constraint_residual < 1e-8);
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
