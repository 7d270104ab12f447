use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dgp::{DataSpec, OutcomeSpec, TreatmentModel, TrueCoefficients};
use crate::balance::SolverConfig;
use crate::data::FeatureOptions;
use crate::error::{Error, Result};
use crate::parametric::{LinearEffectModel, Method};
use crate::spline::SplineConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 200 replications, 200 bootstrap resamples.
    #[default]
    Desk,
    /// 1000 replications, 500 bootstrap resamples.
    Paper,
}

impl Profile {
    pub fn replications(&self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Paper => 1000,
        }
    }

    pub fn bootstrap_b(&self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Paper => 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    /// Linear-in-parameters outcome model with coefficient summaries.
    Parametric,
    /// Tensor-product spline surface with in-sample RMSE summaries.
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineSettings {
    pub interior_knots: usize,
    pub order: usize,
}

/// One simulated configuration at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub treatment_model: TreatmentModel,
    pub outcome_spec: OutcomeSpec,
    pub n: usize,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub true_coefficients: TrueCoefficients,
    pub methods: Vec<Method>,
    pub level: f64,
    pub analysis: Analysis,
    /// Outcome model in the `1 + t1 + t2` grammar.
    pub model: String,
    /// `None` uses the default knot rule for each sample size.
    pub spline: Option<SplineSettings>,
    pub solver: SolverConfig,
    pub features: FeatureOptions,
}

impl ScenarioConfig {
    /// Defaults for a data-generating pair: the model family follows the
    /// outcome spec (main effects, main effects plus interaction, or spline).
    pub fn new(
        name: &str,
        treatment_model: TreatmentModel,
        outcome_spec: OutcomeSpec,
        n: usize,
    ) -> Self {
        let p = treatment_model.p();
        let model = if outcome_spec.has_interaction() {
            LinearEffectModel::with_interactions(p)
        } else {
            LinearEffectModel::main_effects(p)
        }
        .expect("p >= 1")
        .to_string();
        let analysis = if outcome_spec.has_squared_difference() {
            Analysis::Spline
        } else {
            Analysis::Parametric
        };
        Self {
            name: name.to_string(),
            treatment_model,
            outcome_spec,
            n,
            replications: Profile::Desk.replications(),
            bootstrap_b: 0,
            seed: 20_240_607,
            true_coefficients: TrueCoefficients::default(),
            methods: vec![Method::Ebmt, Method::Rcam, Method::Ebut],
            level: 0.95,
            analysis,
            model,
            spline: None,
            solver: SolverConfig::default(),
            features: FeatureOptions::default(),
        }
    }

    pub fn data_spec(&self) -> DataSpec {
        DataSpec {
            treatment_model: self.treatment_model,
            outcome_spec: self.outcome_spec,
            true_coefficients: self.true_coefficients.clone(),
        }
    }

    pub fn outcome_model(&self) -> Result<LinearEffectModel> {
        LinearEffectModel::parse(&self.model, self.treatment_model.p(), None)
    }

    pub fn spline_config(&self) -> SplineConfig {
        match self.spline {
            Some(s) => SplineConfig::new(s.interior_knots, s.order),
            None => SplineConfig::default_for(self.n, self.treatment_model.p()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if self.n < 50 {
            return Err(Error::InvalidConfig(format!(
                "n = {} is below the minimum of 50",
                self.n
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level {} outside (0, 1)",
                self.level
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        self.true_coefficients.validate()?;
        if self.analysis == Analysis::Parametric {
            self.outcome_model()?;
        }
        Ok(())
    }
}

/// On-disk scenario description; expands to one [`ScenarioConfig`] per sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub treatment_model: TreatmentModel,
    pub outcome_spec: OutcomeSpec,
    pub sample_sizes: Vec<usize>,
    #[serde(default)]
    pub profile: Profile,
    pub replications: Option<usize>,
    pub bootstrap_b: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub analysis: Option<Analysis>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub spline: Option<SplineSettings>,
    #[serde(default)]
    pub true_coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default)]
    pub notes: Option<String>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidConfig("sample_sizes is empty".into()));
        }
        self.sample_sizes
            .iter()
            .map(|&n| {
                let mut cfg =
                    ScenarioConfig::new(&self.name, self.treatment_model, self.outcome_spec, n);
                cfg.replications = self.replications.unwrap_or(self.profile.replications());
                cfg.bootstrap_b = self.bootstrap_b.unwrap_or(self.profile.bootstrap_b());
                cfg.seed = self.seed;
                cfg.true_coefficients = TrueCoefficients::with_overrides(&self.true_coefficients);
                if let Some(m) = &self.methods {
                    cfg.methods = m.clone();
                }
                if let Some(level) = self.level {
                    cfg.level = level;
                }
                if let Some(a) = self.analysis {
                    cfg.analysis = a;
                }
                if let Some(model) = &self.model {
                    cfg.model = model.clone();
                }
                cfg.spline = self.spline;
                cfg.features = self.features;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}
