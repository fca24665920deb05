//! Problem definition: input features, outputs with objectives, constraints,
//! and the experiment/proposal tables exchanged with a campaign.

mod constraint;
pub mod expr;
mod objective;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::union::tagged_union;

pub use constraint::{check_constraint, ConstraintCheck, ConstraintError, ZERO_EPS};
pub use expr::Expression;
pub use objective::{evaluate_objective, scalarize_apriori, Scalarization, ScalarizeError};
pub use table::{Experiment, ExperimentTable, Prediction, Proposal, ProposalTable, Row, Value};

/// Default tolerance for constraint checks.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A located validation failure. Paths use `field[index].field` notation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ContinuousInput {
    pub key: String,
    /// `[lower, upper]`
    pub bounds: [f64; 2],
    /// Display only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ContinuousInput {
    pub fn new(key: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            key: key.into(),
            bounds: [lower, upper],
            unit: None,
        }
    }

    pub fn lower(&self) -> f64 {
        self.bounds[0]
    }

    pub fn upper(&self) -> f64 {
        self.bounds[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DiscreteInput {
    pub key: String,
    /// Strictly increasing.
    pub values: Vec<f64>,
}

impl DiscreteInput {
    pub fn nearest(&self, x: f64) -> f64 {
        let mut best = self.values[0];
        for &v in &self.values[1..] {
            if (v - x).abs() < (best - x).abs() {
                best = v;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CategoricalInput {
    pub key: String,
    pub categories: Vec<String>,
    /// Per-category mask; absent means every category is allowed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<bool>>,
}

impl CategoricalInput {
    pub fn allowed_labels(&self) -> Vec<&str> {
        self.categories
            .iter()
            .enumerate()
            .filter(|(i, _)| self.allowed.as_ref().is_none_or(|m| m[*i]))
            .map(|(_, c)| c.as_str())
            .collect()
    }

    pub fn is_allowed(&self, label: &str) -> bool {
        self.allowed_labels().contains(&label)
    }
}

tagged_union! {
    pub enum Input {
        Continuous(ContinuousInput) => "ContinuousInput",
        Discrete(DiscreteInput) => "DiscreteInput",
        Categorical(CategoricalInput) => "CategoricalInput",
    }
}

impl Input {
    pub fn key(&self) -> &str {
        match self {
            Input::Continuous(c) => &c.key,
            Input::Discrete(d) => &d.key,
            Input::Categorical(c) => &c.key,
        }
    }

    pub fn as_continuous(&self) -> Option<&ContinuousInput> {
        match self {
            Input::Continuous(c) => Some(c),
            _ => None,
        }
    }

    /// Numeric range for continuous and discrete inputs.
    pub fn numeric_range(&self) -> Option<(f64, f64)> {
        match self {
            Input::Continuous(c) => Some((c.lower(), c.upper())),
            Input::Discrete(d) => Some((d.values[0], *d.values.last()?)),
            Input::Categorical(_) => None,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LinearObjective {
    #[serde(default = "one")]
    pub weight: f64,
}

impl Default for LinearObjective {
    fn default() -> Self {
        Self { weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CloseToTargetObjective {
    pub target_value: f64,
    pub exponent: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SigmoidObjective {
    pub steepness: f64,
    pub threshold: f64,
}

tagged_union! {
    pub enum Objective {
        Maximize(LinearObjective) => "MaximizeObjective",
        Minimize(LinearObjective) => "MinimizeObjective",
        CloseToTarget(CloseToTargetObjective) => "CloseToTargetObjective",
        /// Larger output is feasible.
        MaximizeSigmoid(SigmoidObjective) => "MaximizeSigmoidObjective",
        MinimizeSigmoid(SigmoidObjective) => "MinimizeSigmoidObjective",
    }
}

impl Objective {
    pub fn maximize() -> Self {
        Objective::Maximize(LinearObjective::default())
    }

    pub fn minimize() -> Self {
        Objective::Minimize(LinearObjective::default())
    }

    /// Sigmoid objectives act as black-box feasibility constraints.
    pub fn is_sigmoid(&self) -> bool {
        matches!(
            self,
            Objective::MaximizeSigmoid(_) | Objective::MinimizeSigmoid(_)
        )
    }

    pub fn weight(&self) -> f64 {
        match self {
            Objective::Maximize(o) | Objective::Minimize(o) => o.weight,
            Objective::CloseToTarget(o) => o.weight,
            _ => 1.0,
        }
    }

    fn validate(&self, path: &str, errors: &mut Vec<ValidationError>) {
        let mut check = |field: &str, ok: bool, what: &str| {
            if !ok {
                errors.push(ValidationError::new(format!("{path}.{field}"), what));
            }
        };
        match self {
            Objective::Maximize(o) | Objective::Minimize(o) => {
                check(
                    "weight",
                    o.weight.is_finite() && o.weight > 0.0,
                    "weight must be finite and > 0",
                );
            }
            Objective::CloseToTarget(o) => {
                check(
                    "target_value",
                    o.target_value.is_finite(),
                    "target_value must be finite",
                );
                check(
                    "exponent",
                    o.exponent.is_finite() && o.exponent >= 1.0,
                    "exponent must be finite and >= 1",
                );
                check(
                    "weight",
                    o.weight.is_finite() && o.weight > 0.0,
                    "weight must be finite and > 0",
                );
            }
            Objective::MaximizeSigmoid(o) | Objective::MinimizeSigmoid(o) => {
                check(
                    "steepness",
                    o.steepness.is_finite() && o.steepness > 0.0,
                    "steepness must be finite and > 0",
                );
                check(
                    "threshold",
                    o.threshold.is_finite(),
                    "threshold must be finite",
                );
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ContinuousOutput {
    pub key: String,
    pub objective: Objective,
}

impl ContinuousOutput {
    pub fn new(key: impl Into<String>, objective: Objective) -> Self {
        Self {
            key: key.into(),
            objective,
        }
    }
}

/// `Σ cᵢ·xᵢ (= | <=) rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

/// `expression (= | <=) 0`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConstraint {
    pub expression: Expression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NChooseKConstraint {
    pub features: Vec<String>,
    pub min_count: usize,
    pub max_count: usize,
    pub none_also_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InterpointEqualityConstraint {
    pub feature: String,
}

tagged_union! {
    pub enum Constraint {
        LinearEquality(LinearConstraint) => "LinearEqualityConstraint",
        LinearInequality(LinearConstraint) => "LinearInequalityConstraint",
        NonlinearEquality(NonlinearConstraint) => "NonlinearEqualityConstraint",
        NonlinearInequality(NonlinearConstraint) => "NonlinearInequalityConstraint",
        NChooseK(NChooseKConstraint) => "NChooseKConstraint",
        InterpointEquality(InterpointEqualityConstraint) => "InterpointEqualityConstraint",
    }
}

impl Constraint {
    /// Input keys the constraint reads.
    pub fn features(&self) -> Vec<&str> {
        match self {
            Constraint::LinearEquality(c) | Constraint::LinearInequality(c) => {
                c.features.iter().map(String::as_str).collect()
            }
            Constraint::NonlinearEquality(c) | Constraint::NonlinearInequality(c) => {
                c.expression.identifiers().into_iter().collect()
            }
            Constraint::NChooseK(c) => c.features.iter().map(String::as_str).collect(),
            Constraint::InterpointEquality(c) => vec![c.feature.as_str()],
        }
    }

    /// True for constraints that tie a row's coordinates with `=`.
    pub fn is_equality(&self) -> bool {
        matches!(
            self,
            Constraint::LinearEquality(_) | Constraint::NonlinearEquality(_)
        )
    }
}

/// Inputs, outputs and constraints of one optimization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub inputs: Vec<Input>,
    pub outputs: Vec<ContinuousOutput>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl Domain {
    pub fn new(
        inputs: Vec<Input>,
        outputs: Vec<ContinuousOutput>,
        constraints: Vec<Constraint>,
    ) -> Self {
        Self {
            inputs,
            outputs,
            constraints,
        }
    }

    pub fn input(&self, key: &str) -> Option<&Input> {
        self.inputs.iter().find(|i| i.key() == key)
    }

    pub fn output(&self, key: &str) -> Option<&ContinuousOutput> {
        self.outputs.iter().find(|o| o.key == key)
    }

    /// Outputs whose objective is optimized (everything except sigmoids).
    pub fn objective_outputs(&self) -> impl Iterator<Item = &ContinuousOutput> {
        self.outputs.iter().filter(|o| !o.objective.is_sigmoid())
    }

    /// Outputs acting as black-box feasibility constraints.
    pub fn sigmoid_outputs(&self) -> impl Iterator<Item = &ContinuousOutput> {
        self.outputs.iter().filter(|o| o.objective.is_sigmoid())
    }

    pub fn interpoint_features(&self) -> Vec<&str> {
        self.constraints
            .iter()
            .filter_map(|c| match c {
                Constraint::InterpointEquality(c) => Some(c.feature.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Checks every invariant, returning all violations.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut check_key = |key: &str, path: String, errors: &mut Vec<ValidationError>| {
            if key.is_empty() {
                errors.push(ValidationError::new(path, "key must be nonempty"));
            } else if !seen.insert(key.to_owned()) {
                errors.push(ValidationError::new(path, format!("duplicate key `{key}`")));
            }
        };

        for (i, input) in self.inputs.iter().enumerate() {
            let path = format!("inputs[{i}]");
            check_key(input.key(), format!("{path}.key"), &mut errors);
            match input {
                Input::Continuous(c) => {
                    let [lo, hi] = c.bounds;
                    if !lo.is_finite() || !hi.is_finite() {
                        errors.push(ValidationError::new(
                            format!("{path}.bounds"),
                            "bounds must be finite",
                        ));
                    } else if lo >= hi {
                        errors.push(ValidationError::new(
                            format!("{path}.bounds"),
                            format!("lower bound {lo} must be < upper bound {hi}"),
                        ));
                    }
                }
                Input::Discrete(d) => {
                    if d.values.len() < 2 {
                        errors.push(ValidationError::new(
                            format!("{path}.values"),
                            "at least 2 values required",
                        ));
                    }
                    if d.values.iter().any(|v| !v.is_finite()) {
                        errors.push(ValidationError::new(
                            format!("{path}.values"),
                            "values must be finite",
                        ));
                    } else if d.values.windows(2).any(|w| w[0] >= w[1]) {
                        errors.push(ValidationError::new(
                            format!("{path}.values"),
                            "values must be strictly increasing",
                        ));
                    }
                }
                Input::Categorical(c) => {
                    if c.categories.len() < 2 {
                        errors.push(ValidationError::new(
                            format!("{path}.categories"),
                            "at least 2 categories required",
                        ));
                    }
                    let mut labels = BTreeSet::new();
                    for (j, label) in c.categories.iter().enumerate() {
                        if label.is_empty() {
                            errors.push(ValidationError::new(
                                format!("{path}.categories[{j}]"),
                                "label must be nonempty",
                            ));
                        } else if !labels.insert(label) {
                            errors.push(ValidationError::new(
                                format!("{path}.categories[{j}]"),
                                format!("duplicate label `{label}`"),
                            ));
                        }
                    }
                    if let Some(mask) = &c.allowed {
                        if mask.len() != c.categories.len() {
                            errors.push(ValidationError::new(
                                format!("{path}.allowed"),
                                format!(
                                    "mask has {} entries for {} categories",
                                    mask.len(),
                                    c.categories.len()
                                ),
                            ));
                        } else if !mask.iter().any(|&b| b) {
                            errors.push(ValidationError::new(
                                format!("{path}.allowed"),
                                "at least one category must be allowed",
                            ));
                        }
                    }
                }
            }
        }

        if self.outputs.is_empty() {
            errors.push(ValidationError::new(
                "outputs",
                "at least one output required",
            ));
        }
        for (i, output) in self.outputs.iter().enumerate() {
            check_key(&output.key, format!("outputs[{i}].key"), &mut errors);
            output
                .objective
                .validate(&format!("outputs[{i}].objective"), &mut errors);
        }

        let mut interpoint: BTreeSet<&str> = BTreeSet::new();
        for (i, constraint) in self.constraints.iter().enumerate() {
            let path = format!("constraints[{i}]");
            self.validate_constraint(constraint, &path, &mut errors);
            if let Constraint::InterpointEquality(c) = constraint {
                if !interpoint.insert(&c.feature) {
                    errors.push(ValidationError::new(
                        format!("{path}.feature"),
                        format!("more than one interpoint equality on `{}`", c.feature),
                    ));
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    fn check_continuous_ref(&self, key: &str, path: String, errors: &mut Vec<ValidationError>) {
        match self.input(key) {
            None => errors.push(ValidationError::new(path, format!("unknown input `{key}`"))),
            Some(Input::Continuous(_)) => {}
            Some(_) => errors.push(ValidationError::new(
                path,
                format!("constraint on non-continuous input `{key}`"),
            )),
        }
    }

    fn validate_constraint(
        &self,
        constraint: &Constraint,
        path: &str,
        errors: &mut Vec<ValidationError>,
    ) {
        match constraint {
            Constraint::LinearEquality(c) | Constraint::LinearInequality(c) => {
                if c.features.is_empty() {
                    errors.push(ValidationError::new(
                        format!("{path}.features"),
                        "at least one feature required",
                    ));
                }
                for (j, key) in c.features.iter().enumerate() {
                    self.check_continuous_ref(key, format!("{path}.features[{j}]"), errors);
                }
                if c.coefficients.len() != c.features.len() {
                    errors.push(ValidationError::new(
                        format!("{path}.coefficients"),
                        format!(
                            "{} coefficients for {} features",
                            c.coefficients.len(),
                            c.features.len()
                        ),
                    ));
                }
                if c.coefficients.iter().any(|v| !v.is_finite()) {
                    errors.push(ValidationError::new(
                        format!("{path}.coefficients"),
                        "coefficients must be finite",
                    ));
                }
                if !c.rhs.is_finite() {
                    errors.push(ValidationError::new(
                        format!("{path}.rhs"),
                        "rhs must be finite",
                    ));
                }
            }
            Constraint::NonlinearEquality(c) | Constraint::NonlinearInequality(c) => {
                for key in c.expression.identifiers() {
                    self.check_continuous_ref(key, format!("{path}.expression"), errors);
                }
            }
            Constraint::NChooseK(c) => {
                if c.features.is_empty() {
                    errors.push(ValidationError::new(
                        format!("{path}.features"),
                        "at least one feature required",
                    ));
                }
                let mut listed = BTreeSet::new();
                for (j, key) in c.features.iter().enumerate() {
                    self.check_continuous_ref(key, format!("{path}.features[{j}]"), errors);
                    if !listed.insert(key) {
                        errors.push(ValidationError::new(
                            format!("{path}.features[{j}]"),
                            format!("duplicate feature `{key}`"),
                        ));
                    }
                }
                if c.min_count > c.max_count {
                    errors.push(ValidationError::new(
                        format!("{path}.min_count"),
                        format!(
                            "min_count {} exceeds max_count {}",
                            c.min_count, c.max_count
                        ),
                    ));
                }
                if c.max_count > c.features.len() {
                    errors.push(ValidationError::new(
                        format!("{path}.max_count"),
                        format!(
                            "max_count {} exceeds the {} listed features",
                            c.max_count,
                            c.features.len()
                        ),
                    ));
                }
            }
            Constraint::InterpointEquality(c) => {
                self.check_continuous_ref(&c.feature, format!("{path}.feature"), errors);
            }
        }
    }

    /// Input values as reals (continuous and discrete only).
    pub fn real_assignment(row: &Row) -> BTreeMap<String, f64> {
        row.iter()
            .filter_map(|(k, v)| v.as_real().map(|x| (k.clone(), x)))
            .collect()
    }
}
