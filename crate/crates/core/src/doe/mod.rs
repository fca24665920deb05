//! Classical designs: full and fractional two-level factorials, and D-/A-
//! optimal designs by coordinate exchange over constrained mixed spaces.

mod factorial;
mod model;
mod optimal;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, Input, Row, Value, DEFAULT_TOL};
use crate::sampling::{derive_seed, SampleError};
use crate::union::tagged_union;

pub use factorial::{fractional_factorial, full_factorial, FactorialGenerator, GeneratedFactor};
pub use model::{model_matrix, ModelKind, ModelSpec};
pub use optimal::{
    coded_row, criterion_value, optimal_design, Criterion, OptimalDesign, OptimalDesignConfig,
};

/// Upper limit on the size of an enumerated factorial.
pub const MAX_FACTORIAL_ROWS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("feature `{0}` has no levels")]
    EmptyLevels(String),
    #[error("invalid generator: {0}")]
    Generator(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("design row has no usable value for `{0}`")]
    MissingColumn(String),
    #[error("{n_runs} runs cannot support a model with {n_terms} terms")]
    TooFewRuns { n_runs: usize, n_terms: usize },
    #[error("unsupported criterion `{0}`; supported criteria are D and A")]
    UnsupportedCriterion(String),
    #[error("factorial would have {0} rows")]
    TooLarge(usize),
    #[error("no feasible design rows: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FullFactorialDesign {
    /// Evenly spaced levels per continuous input (discrete inputs use their
    /// values, categoricals their allowed labels).
    #[serde(default = "two")]
    pub levels: usize,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FractionalFactorialDesign {
    pub generator: FactorialGenerator,
    /// Numeric input per factor letter, base factors first. Unlisted inputs
    /// sit at their midpoint.
    pub features: Vec<String>,
}

tagged_union! {
    pub enum DesignConfig {
        FullFactorial(FullFactorialDesign) => "FullFactorialDesign",
        FractionalFactorial(FractionalFactorialDesign) => "FractionalFactorialDesign",
        Optimal(OptimalDesignConfig) => "OptimalDesign",
    }
}

impl DesignConfig {
    pub fn validate(&self, domain: &Domain) -> Result<(), DesignError> {
        match self {
            DesignConfig::FullFactorial(f) if f.levels < 2 => {
                Err(DesignError::Model("levels must be at least 2".into()))
            }
            DesignConfig::FullFactorial(_) => Ok(()),
            DesignConfig::FractionalFactorial(f) => {
                f.generator.validate()?;
                if f.features.len() != f.generator.letters().len() {
                    return Err(DesignError::Generator(format!(
                        "{} factors but {} features",
                        f.generator.letters().len(),
                        f.features.len()
                    )));
                }
                for k in &f.features {
                    if domain.input(k).and_then(Input::numeric_range).is_none() {
                        return Err(DesignError::Generator(format!(
                            "`{k}` is not a numeric input"
                        )));
                    }
                }
                Ok(())
            }
            DesignConfig::Optimal(o) => o.model.validate(domain),
        }
    }
}

fn midpoint(input: &Input) -> Value {
    match input {
        Input::Continuous(c) => Value::Real(0.5 * (c.lower() + c.upper())),
        Input::Discrete(d) => {
            Value::Real(d.nearest(0.5 * (d.values[0] + d.values[d.values.len() - 1])))
        }
        Input::Categorical(c) => Value::from(c.allowed_labels()[0]),
    }
}

fn enumerate_design(domain: &Domain, config: &DesignConfig) -> Result<Vec<Row>, DesignError> {
    match config {
        DesignConfig::FullFactorial(f) => {
            let levels: Vec<(String, Vec<Value>)> = domain
                .inputs
                .iter()
                .map(|input| {
                    let values = match input {
                        Input::Continuous(c) => (0..f.levels)
                            .map(|i| {
                                Value::Real(
                                    c.lower()
                                        + (c.upper() - c.lower()) * i as f64
                                            / (f.levels - 1) as f64,
                                )
                            })
                            .collect(),
                        Input::Discrete(d) => d.values.iter().map(|&v| Value::Real(v)).collect(),
                        Input::Categorical(c) => {
                            c.allowed_labels().into_iter().map(Value::from).collect()
                        }
                    };
                    (input.key().to_owned(), values)
                })
                .collect();
            let total = levels
                .iter()
                .try_fold(1usize, |acc, (_, l)| acc.checked_mul(l.len()))
                .unwrap_or(usize::MAX);
            if total > MAX_FACTORIAL_ROWS {
                return Err(DesignError::TooLarge(total));
            }
            full_factorial(&levels)
        }
        DesignConfig::FractionalFactorial(f) => {
            let coded = fractional_factorial(&f.generator)?;
            Ok(coded
                .iter()
                .map(|levels| {
                    let mut row: Row = domain
                        .inputs
                        .iter()
                        .map(|i| (i.key().to_owned(), midpoint(i)))
                        .collect();
                    for (key, &c) in f.features.iter().zip(levels) {
                        let (lo, hi) = domain
                            .input(key)
                            .and_then(Input::numeric_range)
                            .expect("validated");
                        row.insert(key.clone(), Value::Real(if c < 0.0 { lo } else { hi }));
                    }
                    row
                })
                .collect())
        }
        DesignConfig::Optimal(_) => unreachable!("optimal designs are not enumerated"),
    }
}

/// `n` design rows for the `ask_index`-th request.
///
/// Factorial designs are enumerated, infeasible rows dropped, and served
/// cyclically from `offset`. Optimal designs are computed for `n` runs with
/// a seed derived from the configured seed and `ask_index`.
pub fn design_rows(
    domain: &Domain,
    config: &DesignConfig,
    n: usize,
    offset: usize,
    ask_index: u64,
) -> Result<Vec<Row>, DesignError> {
    config.validate(domain)?;
    let mut rows = match config {
        DesignConfig::Optimal(o) => {
            let mut o = o.clone();
            o.seed = derive_seed(&[o.seed, ask_index]);
            optimal_design(domain, &o, n)?.rows
        }
        _ => {
            let all: Vec<Row> = enumerate_design(domain, config)?
                .into_iter()
                .filter(|r| domain.row_feasible(r, DEFAULT_TOL))
                .collect();
            if all.is_empty() {
                return Err(DesignError::Infeasible(
                    "every design row violates a constraint".into(),
                ));
            }
            (0..n)
                .map(|i| all[(offset + i) % all.len()].clone())
                .collect()
        }
    };
    for key in domain.interpoint_features() {
        if let Some(v) = rows.first().and_then(|r| r.get(key)).cloned() {
            for r in rows.iter_mut().skip(1) {
                r.insert(key.to_owned(), v.clone());
            }
        }
    }
    if !domain.batch_feasible(&rows, DEFAULT_TOL) {
        return Err(DesignError::Infeasible(
            "design batch violates a constraint".into(),
        ));
    }
    Ok(rows)
}
