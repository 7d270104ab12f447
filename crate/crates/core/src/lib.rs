//! Entropy balancing for multivariate continuous treatments.
//!
//! The crate computes covariate-balancing weights for a vector of continuous
//! treatments by solving the convex dual of a KL-divergence problem, then uses
//! them to estimate the causal effect function `E[Y(t)]`:
//!
//! * [`data`] holds samples, standardization, and the balance features.
//! * [`balance`] solves for the weights.
//! * [`parametric`] fits effect models linear in their parameters, with
//!   sandwich and bootstrap inference, plus the RCAM and EBUT baselines.
//! * [`spline`] fits tensor-product B-spline effect surfaces.
//! * [`diagnostics`] measures balance with a Wilks-type statistic.
//! * [`simulation`] generates synthetic studies and aggregates bias, RMSE,
//!   and coverage across replications.
//! * [`analysis`] drives CSV workflows and report output for the `ebmt` binary.
//!
//! ```no_run
//! use ebmt::prelude::*;
//!
//! # fn main() -> ebmt::Result<()> {
//! let data = simulation::generate(&simulation::DataSpec::default(), 500, 7, 0)?;
//! let ebmt = Ebmt::new(LinearEffectModel::main_effects(2)?);
//! let fit = ebmt.fit(&data.sample, Some(0.95))?;
//! println!("{:?}", fit.estimate.theta_hat);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod balance;
pub mod data;
pub mod diagnostics;
mod error;
mod linalg;
pub mod parametric;
pub mod rng;
pub mod simulation;
pub mod spline;

pub use error::{Block, Error, Result};

pub mod prelude {
    pub use crate::balance::{solve_weights, SolverConfig, WeightSolution};
    pub use crate::data::{build_balance_problem, standardize, BalanceProblem, Sample};
    pub use crate::diagnostics::{balance_test, BalanceReport};
    pub use crate::parametric::{
        bootstrap_ci, BootstrapConfig, Ebmt, Ebut, EffectEstimate, EffectEstimator,
        LinearEffectModel, Method, Rcam,
    };
    pub use crate::simulation;
    pub use crate::spline::{fit_spline, SplineConfig, SplineFit};
}
