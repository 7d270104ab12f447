//! Monte Carlo harness comparing EBMT with the RCAM and EBUT baselines.
//!
//! Replications run in parallel but every random draw is keyed by
//! `(seed, replication, stage)`, and aggregation walks replications in index
//! order, so a report is a pure function of its config.

mod dgp;
mod runner;
mod scenario;

pub use dgp::{
    covariate_factor, gen_covariates, gen_outcome, gen_treatments, generate, outcome_mean,
    treatment_mean, true_effect, DataSpec, OutcomeSpec, ReplicationSeeds, SimulatedData,
    TreatmentModel, TrueCoefficients, COVARIATE_CORRELATION, NUM_COVARIATES, OUTCOME_NOISE_SD,
};
pub use runner::{
    aggregate, run_replication, run_scenario, run_scenario_with_log, CoefficientSummary,
    MethodOutcome, MethodStatus, MethodSummary, ReplicationRecord, ScenarioReport, NOT_IMPLEMENTED,
    UNWEIGHTED,
};
pub use scenario::{Analysis, Profile, ScenarioConfig, ScenarioFile, SplineSettings};
