use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{check_constraint, Domain, Input, ValidationError, DEFAULT_TOL};

/// One input setting: a real for continuous/discrete inputs, a label for
/// categoricals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Label(String),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(s) => Some(s),
            Value::Real(_) => None,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Label(s.to_owned())
    }
}

/// Input key → value.
pub type Row = BTreeMap<String, Value>;

/// One measured (or pending) experiment. A missing output key means the
/// value was not measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub inputs: Row,
    #[serde(default)]
    pub outputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentTable {
    pub rows: Vec<Experiment>,
}

impl ExperimentTable {
    pub fn new(rows: Vec<Experiment>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: &ExperimentTable) {
        self.rows.extend(other.rows.iter().cloned());
    }

    /// Number of rows with a measured value for `output`.
    pub fn measured(&self, output: &str) -> usize {
        self.rows
            .iter()
            .filter(|r| r.outputs.contains_key(output))
            .count()
    }

    /// Validates against a domain. Out-of-bounds continuous values are
    /// historical fact and come back as warnings; everything else is an error.
    pub fn validate(&self, domain: &Domain) -> Result<Vec<ValidationError>, Vec<ValidationError>> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let path = format!("rows[{i}]");
            validate_inputs(
                domain,
                &row.inputs,
                &format!("{path}.inputs"),
                false,
                &mut errors,
                &mut warnings,
            );
            for (key, y) in &row.outputs {
                let p = format!("{path}.outputs.{key}");
                if domain.output(key).is_none() {
                    errors.push(ValidationError::new(p, format!("unknown output `{key}`")));
                } else if !y.is_finite() {
                    errors.push(ValidationError::new(p, "output values must be finite"));
                }
            }
        }
        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(errors)
        }
    }
}

/// Predicted mean/std (output units) and desirability at a proposed row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
    pub desirability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Proposal {
    pub inputs: Row,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predictions: BTreeMap<String, Prediction>,
}

impl Proposal {
    pub fn new(inputs: Row) -> Self {
        Self {
            inputs,
            predictions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProposalTable {
    pub rows: Vec<Proposal>,
}

impl ProposalTable {
    /// Proposals are generated by us: bounds violations and constraint
    /// violations (including interpoint equality across the batch) are errors.
    pub fn validate(&self, domain: &Domain) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        for (i, p) in self.rows.iter().enumerate() {
            let path = format!("rows[{i}]");
            validate_inputs(
                domain,
                &p.inputs,
                &format!("{path}.inputs"),
                true,
                &mut errors,
                &mut warnings,
            );
            for (key, pred) in &p.predictions {
                let pp = format!("{path}.predictions.{key}");
                if domain.output(key).is_none() {
                    errors.push(ValidationError::new(
                        pp.clone(),
                        format!("unknown output `{key}`"),
                    ));
                }
                if ![pred.mean, pred.std, pred.desirability]
                    .iter()
                    .all(|v| v.is_finite())
                    || pred.std < 0.0
                {
                    errors.push(ValidationError::new(
                        pp,
                        "prediction must be finite with std >= 0",
                    ));
                }
            }
        }
        if errors.is_empty() && !self.rows.is_empty() {
            let rows: Vec<Row> = self.rows.iter().map(|p| p.inputs.clone()).collect();
            for (ci, c) in domain.constraints.iter().enumerate() {
                match check_constraint(c, &rows, DEFAULT_TOL) {
                    Ok(check) if check.satisfied => {}
                    Ok(check) => errors.push(ValidationError::new(
                        format!("constraints[{ci}]"),
                        format!(
                            "violated by proposals (max violation {:e})",
                            check.max_violation()
                        ),
                    )),
                    Err(e) => errors.push(ValidationError::new(
                        format!("constraints[{ci}]"),
                        e.to_string(),
                    )),
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn validate_inputs(
    domain: &Domain,
    row: &Row,
    path: &str,
    strict_bounds: bool,
    errors: &mut Vec<ValidationError>,
    warnings: &mut Vec<ValidationError>,
) {
    for key in row.keys() {
        if domain.input(key).is_none() {
            errors.push(ValidationError::new(
                format!("{path}.{key}"),
                format!("unknown input `{key}`"),
            ));
        }
    }
    for input in &domain.inputs {
        let key = input.key();
        let p = format!("{path}.{key}");
        let Some(value) = row.get(key) else {
            errors.push(ValidationError::new(p, "missing value"));
            continue;
        };
        match (input, value) {
            (Input::Continuous(c), Value::Real(x)) => {
                if !x.is_finite() {
                    errors.push(ValidationError::new(p, "value must be finite"));
                } else if *x < c.lower() || *x > c.upper() {
                    let e = ValidationError::new(
                        p,
                        format!("value {x} outside bounds [{}, {}]", c.lower(), c.upper()),
                    );
                    if strict_bounds {
                        errors.push(e);
                    } else {
                        warnings.push(e);
                    }
                }
            }
            (Input::Discrete(d), Value::Real(x)) => {
                if !d.values.contains(x) {
                    errors.push(ValidationError::new(
                        p,
                        format!("value {x} is not one of {:?}", d.values),
                    ));
                }
            }
            (Input::Categorical(c), Value::Label(label)) => {
                if !c.is_allowed(label) {
                    errors.push(ValidationError::new(
                        p,
                        format!(
                            "label `{label}` is not among the allowed categories {:?}",
                            c.allowed_labels()
                        ),
                    ));
                }
            }
            (Input::Categorical(_), Value::Real(_)) => {
                errors.push(ValidationError::new(p, "expected a category label"));
            }
            (_, Value::Label(_)) => {
                errors.push(ValidationError::new(p, "expected a number"));
            }
        }
    }
}
