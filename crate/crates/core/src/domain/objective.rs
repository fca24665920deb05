use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Objective;

/// Larger-is-better transform of a raw output value.
pub fn evaluate_objective(objective: &Objective, y: f64) -> f64 {
    match objective {
        Objective::Maximize(o) => o.weight * y,
        Objective::Minimize(o) => -o.weight * y,
        Objective::CloseToTarget(o) => -o.weight * (y - o.target_value).abs().powf(o.exponent),
        Objective::MaximizeSigmoid(o) => 1.0 / (1.0 + (-o.steepness * (y - o.threshold)).exp()),
        Objective::MinimizeSigmoid(o) => 1.0 / (1.0 + (o.steepness * (y - o.threshold)).exp()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Scalarization {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarizeError {
    #[error("{desirabilities} desirabilities but {weights} weights")]
    LengthMismatch {
        desirabilities: usize,
        weights: usize,
    },
    #[error("nothing to scalarize")]
    Empty,
    #[error(
        "multiplicative scalarization needs positive desirabilities, got {value} at index {index}"
    )]
    NonPositive { index: usize, value: f64 },
}

/// A-priori aggregation of several desirabilities into one.
///
/// Multiplicative mode does not shift anything: callers map desirabilities
/// into (0, 1] first.
pub fn scalarize_apriori(
    desirabilities: &[f64],
    weights: &[f64],
    mode: Scalarization,
) -> Result<f64, ScalarizeError> {
    if desirabilities.len() != weights.len() {
        return Err(ScalarizeError::LengthMismatch {
            desirabilities: desirabilities.len(),
            weights: weights.len(),
        });
    }
    if desirabilities.is_empty() {
        return Err(ScalarizeError::Empty);
    }
    match mode {
        Scalarization::Additive => Ok(desirabilities.iter().zip(weights).map(|(g, w)| g * w).sum()),
        Scalarization::Multiplicative => {
            let mut product = 1.0;
            for (index, (&g, &w)) in desirabilities.iter().zip(weights).enumerate() {
                if g <= 0.0 {
                    return Err(ScalarizeError::NonPositive { index, value: g });
                }
                product *= g.powf(w);
            }
            Ok(product)
        }
    }
}
