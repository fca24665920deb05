use thiserror::Error;

use super::expr::EvalError;
use super::{Constraint, Domain, Row};

/// Magnitude above which an NChooseK feature counts as active.
pub const ZERO_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("row {row} has no numeric value for `{key}`")]
    MissingValue { row: usize, key: String },
    #[error("row {row}: {source}")]
    Eval {
        row: usize,
        #[source]
        source: EvalError,
    },
}

/// Result of checking one constraint against a batch of rows.
///
/// `violations` has one entry per row, except for interpoint equality which
/// is a batch-level property and reports a single entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    pub violations: Vec<f64>,
}

impl ConstraintCheck {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }
}

fn real(rows: &[Row], row: usize, key: &str) -> Result<f64, ConstraintError> {
    rows[row]
        .get(key)
        .and_then(|v| v.as_real())
        .ok_or_else(|| ConstraintError::MissingValue {
            row,
            key: key.to_owned(),
        })
}

/// Amount by which a single row violates `constraint` (0 when satisfied).
fn row_violation(
    constraint: &Constraint,
    rows: &[Row],
    i: usize,
    tol: f64,
) -> Result<f64, ConstraintError> {
    // amount beyond the tolerance, so the magnitude is continuous in the row
    let excess = |v: f64| (v - tol).max(0.0);
    Ok(match constraint {
        Constraint::LinearEquality(c) | Constraint::LinearInequality(c) => {
            let mut lhs = 0.0;
            for (key, coef) in c.features.iter().zip(&c.coefficients) {
                lhs += coef * real(rows, i, key)?;
            }
            let residual = lhs - c.rhs;
            if matches!(constraint, Constraint::LinearEquality(_)) {
                excess(residual.abs())
            } else {
                excess(residual)
            }
        }
        Constraint::NonlinearEquality(c) | Constraint::NonlinearInequality(c) => {
            let vars = Domain::real_assignment(&rows[i]);
            let value = c
                .expression
                .evaluate(&vars)
                .map_err(|source| ConstraintError::Eval { row: i, source })?;
            if matches!(constraint, Constraint::NonlinearEquality(_)) {
                excess(value.abs())
            } else {
                excess(value)
            }
        }
        Constraint::NChooseK(c) => {
            let mut active = 0usize;
            for key in &c.features {
                if real(rows, i, key)?.abs() > ZERO_EPS {
                    active += 1;
                }
            }
            if active == 0 && c.none_also_valid {
                0.0
            } else if active > c.max_count {
                (active - c.max_count) as f64
            } else if active < c.min_count {
                (c.min_count - active) as f64
            } else {
                0.0
            }
        }
        Constraint::InterpointEquality(_) => unreachable!("batch-level constraint"),
    })
}

/// Checks `constraint` on a batch of rows at tolerance `tol`.
pub fn check_constraint(
    constraint: &Constraint,
    rows: &[Row],
    tol: f64,
) -> Result<ConstraintCheck, ConstraintError> {
    if let Constraint::InterpointEquality(c) = constraint {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..rows.len() {
            let x = real(rows, i, &c.feature)?;
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let spread = if rows.is_empty() { 0.0 } else { hi - lo };
        let violation = if spread > tol { spread } else { 0.0 };
        return Ok(ConstraintCheck {
            satisfied: violation == 0.0,
            violations: vec![violation],
        });
    }
    let violations = (0..rows.len())
        .map(|i| row_violation(constraint, rows, i, tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstraintCheck {
        satisfied: violations.iter().all(|&v| v == 0.0),
        violations,
    })
}

impl Domain {
    /// True when a single row satisfies every row-level constraint.
    /// Interpoint equality is trivially satisfied by one row.
    pub fn row_feasible(&self, row: &Row, tol: f64) -> bool {
        let rows = std::slice::from_ref(row);
        self.constraints.iter().all(|c| {
            matches!(c, Constraint::InterpointEquality(_))
                || check_constraint(c, rows, tol).is_ok_and(|r| r.satisfied)
        })
    }

    /// True when a whole batch satisfies every constraint.
    pub fn batch_feasible(&self, rows: &[Row], tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|c| check_constraint(c, rows, tol).is_ok_and(|r| r.satisfied))
    }
}
