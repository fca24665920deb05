use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::optimize::AcqOptConfig;
use crate::doe::DesignConfig;
use crate::domain::{Domain, ValidationError};
use crate::gp::Kernel;
use crate::sampling::SamplerConfig;
use crate::union::tagged_union;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExpectedImprovement {}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LogExpectedImprovement {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct UpperConfidenceBound {
    pub beta: f64,
}

tagged_union! {
    pub enum AcquisitionConfig {
        Ei(ExpectedImprovement) => "ExpectedImprovement",
        LogEi(LogExpectedImprovement) => "LogExpectedImprovement",
        Ucb(UpperConfidenceBound) => "UpperConfidenceBound",
    }
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig::LogEi(LogExpectedImprovement {})
    }
}

fn default_fit_restarts() -> usize {
    10
}

fn default_rho() -> f64 {
    0.05
}

fn default_mc_samples() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RandomStrategy {
    pub sampler: SamplerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DoEStrategy {
    pub design: DesignConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SoboStrategy {
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub surrogate: Kernel,
    #[serde(default)]
    pub optimizer: AcqOptConfig,
    #[serde(default)]
    pub seed: u64,
    /// Random restarts for hyperparameter fitting.
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
}

impl Default for SoboStrategy {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            surrogate: Kernel::default(),
            optimizer: AcqOptConfig::default(),
            seed: 0,
            fit_restarts: default_fit_restarts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MoboParEgo {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub surrogate: Kernel,
    #[serde(default)]
    pub optimizer: AcqOptConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
}

impl Default for MoboParEgo {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            surrogate: Kernel::default(),
            optimizer: AcqOptConfig::default(),
            seed: 0,
            fit_restarts: default_fit_restarts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MoboEhvi {
    /// Reference point on the desirability scale, one entry per objective
    /// output in domain order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_point: Option<Vec<f64>>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub surrogate: Kernel,
    #[serde(default)]
    pub optimizer: AcqOptConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
}

impl Default for MoboEhvi {
    fn default() -> Self {
        Self {
            ref_point: None,
            mc_samples: default_mc_samples(),
            surrogate: Kernel::default(),
            optimizer: AcqOptConfig::default(),
            seed: 0,
            fit_restarts: default_fit_restarts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NumberOfExperimentsCondition {
    /// Holds while the experiment count is strictly below this.
    pub below: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AlwaysCondition {}

tagged_union! {
    pub enum StepCondition {
        NumberOfExperiments(NumberOfExperimentsCondition) => "NumberOfExperimentsCondition",
        Always(AlwaysCondition) => "AlwaysCondition",
    }
}

impl StepCondition {
    pub fn holds(&self, n_experiments: usize) -> bool {
        match self {
            StepCondition::NumberOfExperiments(c) => n_experiments < c.below,
            StepCondition::Always(_) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub condition: StepCondition,
    pub strategy: StrategyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StepwiseStrategy {
    pub steps: Vec<Step>,
}

tagged_union! {
    pub enum StrategyConfig {
        Random(RandomStrategy) => "RandomStrategy",
        DoE(DoEStrategy) => "DoEStrategy",
        Sobo(SoboStrategy) => "SoboStrategy",
        ParEgo(MoboParEgo) => "MoboParEGO",
        Ehvi(MoboEhvi) => "MoboEHVI",
        Stepwise(StepwiseStrategy) => "StepwiseStrategy",
    }
}

/// First step whose condition holds at `n_experiments`.
pub fn select_step(stepwise: &StepwiseStrategy, n_experiments: usize) -> Option<&StrategyConfig> {
    stepwise
        .steps
        .iter()
        .find(|s| s.condition.holds(n_experiments))
        .map(|s| &s.strategy)
}

fn check_optimizer(opt: &AcqOptConfig, path: &str, errors: &mut Vec<ValidationError>) {
    if opt.n_raw == 0 {
        errors.push(ValidationError::new(
            format!("{path}.n_raw"),
            "n_raw must be at least 1",
        ));
    }
    if opt.n_restarts == 0 || opt.n_restarts > opt.n_raw {
        errors.push(ValidationError::new(
            format!("{path}.n_restarts"),
            "n_restarts must be between 1 and n_raw",
        ));
    }
}

impl StrategyConfig {
    /// Resolves stepwise nesting to the leaf strategy active at `n_experiments`.
    pub fn active(&self, n_experiments: usize) -> Option<&StrategyConfig> {
        match self {
            StrategyConfig::Stepwise(s) => select_step(s, n_experiments)?.active(n_experiments),
            leaf => Some(leaf),
        }
    }

    /// Checks the configuration against a domain. Paths are dotted and
    /// relative to the config.
    pub fn validate(&self, domain: &Domain) -> Vec<ValidationError> {
        let mut errors = Vec::new();
        self.validate_into(domain, "", &mut errors);
        errors
    }

    fn validate_into(&self, domain: &Domain, prefix: &str, errors: &mut Vec<ValidationError>) {
        let path = |field: &str| {
            if prefix.is_empty() {
                field.to_owned()
            } else {
                format!("{prefix}.{field}")
            }
        };
        let n_objectives = domain.objective_outputs().count();
        match self {
            StrategyConfig::Random(_) => {}
            StrategyConfig::DoE(d) => {
                if let Err(e) = d.design.validate(domain) {
                    errors.push(ValidationError::new(path("design"), e.to_string()));
                }
            }
            StrategyConfig::Sobo(s) => {
                if let AcquisitionConfig::Ucb(u) = &s.acquisition {
                    if !(u.beta.is_finite() && u.beta > 0.0) {
                        errors.push(ValidationError::new(
                            path("acquisition.beta"),
                            "beta must be finite and > 0",
                        ));
                    }
                }
                if n_objectives == 0 {
                    errors.push(ValidationError::new(
                        path("type"),
                        "SoboStrategy needs at least one objective output",
                    ));
                }
                check_optimizer(&s.optimizer, &path("optimizer"), errors);
            }
            StrategyConfig::ParEgo(p) => {
                if !(p.rho.is_finite() && p.rho >= 0.0) {
                    errors.push(ValidationError::new(
                        path("rho"),
                        "rho must be finite and >= 0",
                    ));
                }
                if n_objectives < 2 {
                    errors.push(ValidationError::new(
                        path("type"),
                        "MoboParEGO needs at least two objective outputs",
                    ));
                }
                check_optimizer(&p.optimizer, &path("optimizer"), errors);
            }
            StrategyConfig::Ehvi(e) => {
                if !(2..=4).contains(&n_objectives) {
                    errors.push(ValidationError::new(
                        path("type"),
                        format!(
                            "MoboEHVI supports 2 to 4 objective outputs, domain has {n_objectives}"
                        ),
                    ));
                }
                if let Some(r) = &e.ref_point {
                    if r.len() != n_objectives {
                        errors.push(ValidationError::new(
                            path("ref_point"),
                            format!("expected {n_objectives} entries, got {}", r.len()),
                        ));
                    }
                    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
                        errors.push(ValidationError::new(
                            path(&format!("ref_point[{i}]")),
                            "must be finite",
                        ));
                    }
                }
                if e.mc_samples < 2 {
                    errors.push(ValidationError::new(
                        path("mc_samples"),
                        "mc_samples must be at least 2",
                    ));
                }
                check_optimizer(&e.optimizer, &path("optimizer"), errors);
            }
            StrategyConfig::Stepwise(s) => {
                if s.steps.is_empty() {
                    errors.push(ValidationError::new(
                        path("steps"),
                        "steps must not be empty",
                    ));
                } else if !matches!(
                    s.steps[s.steps.len() - 1].condition,
                    StepCondition::Always(_)
                ) {
                    errors.push(ValidationError::new(
                        path(&format!("steps[{}].condition", s.steps.len() - 1)),
                        "the last step must use AlwaysCondition",
                    ));
                }
                for (i, step) in s.steps.iter().enumerate() {
                    step.strategy.validate_into(
                        domain,
                        &path(&format!("steps[{i}].strategy")),
                        errors,
                    );
                }
            }
        }
    }
}
