//! Constraint checks written against the document semantics rather than the
//! engine's own feasibility code.

use std::collections::BTreeMap;

use kiln_core::domain::{Constraint, Domain, Input, Row, Value};

pub const TOL: f64 = 1e-6;
/// Magnitude above which an NChooseK feature counts as active.
pub const ACTIVE_EPS: f64 = 1e-8;

fn reals(row: &Row) -> BTreeMap<String, f64> {
    row.iter()
        .filter_map(|(k, v)| v.as_real().map(|x| (k.clone(), x)))
        .collect()
}

/// Every violation in one batch, described.
pub fn batch_violations(domain: &Domain, batch: &[Row]) -> Vec<String> {
    let mut out = Vec::new();
    for (r, row) in batch.iter().enumerate() {
        if row.len() != domain.inputs.len() {
            out.push(format!(
                "row {r}: {} values for {} inputs",
                row.len(),
                domain.inputs.len()
            ));
        }
        for input in &domain.inputs {
            let Some(v) = row.get(input.key()) else {
                out.push(format!("row {r}: missing `{}`", input.key()));
                continue;
            };
            let ok = match (input, v) {
                (Input::Continuous(c), Value::Real(x)) => {
                    *x >= c.bounds[0] - TOL && *x <= c.bounds[1] + TOL
                }
                (Input::Discrete(d), Value::Real(x)) => d.values.contains(x),
                (Input::Categorical(c), Value::Label(l)) => match &c.allowed {
                    Some(mask) => c.categories.iter().zip(mask).any(|(cat, &a)| a && cat == l),
                    None => c.categories.contains(l),
                },
                _ => false,
            };
            if !ok {
                out.push(format!(
                    "row {r}: `{}` = {v:?} outside its domain",
                    input.key()
                ));
            }
        }
        let x = reals(row);
        for (ci, c) in domain.constraints.iter().enumerate() {
            let ok = match c {
                Constraint::LinearInequality(l) | Constraint::LinearEquality(l) => {
                    let lhs: f64 = l
                        .features
                        .iter()
                        .zip(&l.coefficients)
                        .map(|(k, a)| a * x[k])
                        .sum();
                    if matches!(c, Constraint::LinearEquality(_)) {
                        (lhs - l.rhs).abs() <= TOL
                    } else {
                        lhs <= l.rhs + TOL
                    }
                }
                Constraint::NonlinearInequality(n) => {
                    n.expression.evaluate(&x).is_ok_and(|v| v <= TOL)
                }
                Constraint::NonlinearEquality(n) => {
                    n.expression.evaluate(&x).is_ok_and(|v| v.abs() <= TOL)
                }
                Constraint::NChooseK(n) => {
                    let active = n
                        .features
                        .iter()
                        .filter(|k| x[k.as_str()].abs() > ACTIVE_EPS)
                        .count();
                    (active == 0 && n.none_also_valid)
                        || (n.min_count..=n.max_count).contains(&active)
                }
                Constraint::InterpointEquality(_) => true,
            };
            if !ok {
                out.push(format!("row {r}: constraint {ci} ({}) violated", c.tag()));
            }
        }
    }
    for c in &domain.constraints {
        if let Constraint::InterpointEquality(ie) = c {
            let bits: Vec<u64> = batch
                .iter()
                .map(|r| r[&ie.feature].as_real().unwrap_or(f64::NAN).to_bits())
                .collect();
            if bits.windows(2).any(|w| w[0] != w[1]) {
                out.push(format!(
                    "interpoint `{}` differs within the batch",
                    ie.feature
                ));
            }
        }
    }
    out
}

/// Deterministic synthetic measurements for any domain: a smooth function of
/// the real inputs plus a per-label offset, different per output.
pub fn synthetic_outputs(domain: &Domain, row: &Row) -> BTreeMap<String, f64> {
    domain
        .outputs
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let mut y = 0.0;
            for (i, input) in domain.inputs.iter().enumerate() {
                let w = (i + 1) as f64 * (j + 1) as f64;
                y += match (input, &row[input.key()]) {
                    (Input::Categorical(c), Value::Label(l)) => {
                        0.3 * c.categories.iter().position(|x| x == l).unwrap_or(0) as f64
                    }
                    (input, Value::Real(x)) => {
                        let (lo, hi) = input.numeric_range().unwrap();
                        (w * (x - lo) / (hi - lo).max(1e-12)).sin() / (i + 1) as f64
                    }
                    _ => 0.0,
                };
            }
            (o.key.clone(), y)
        })
        .collect()
}
