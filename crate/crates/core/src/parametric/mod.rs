//! Parametric effect estimation: weighted least squares for effect functions
//! linear in their parameters, sandwich variance, and Wald or percentile
//! bootstrap intervals.

mod bootstrap;
mod estimators;
mod fit;
mod model;

pub use bootstrap::{bootstrap_ci, percentile_ranks, BootstrapConfig};
pub use estimators::{
    estimator_for, unweighted_fit, Ebmt, EbmtFit, Ebut, EffectEstimator, Method, Rcam,
    TreatmentScale,
};
pub use fit::{
    fit_parametric, fit_with_inference, normal_critical_value, sandwich_variance, wald_ci,
    BootstrapSummary, EffectEstimate, Interval,
};
pub use model::{LinearEffectModel, Term};

pub(crate) use fit::normalized_weights;
