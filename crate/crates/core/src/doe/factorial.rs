use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::DesignError;
use crate::domain::{Row, Value};

/// Cartesian product of per-feature levels, last feature varying fastest.
pub fn full_factorial(levels: &[(String, Vec<Value>)]) -> Result<Vec<Row>, DesignError> {
    if levels.is_empty() {
        return Err(DesignError::EmptyLevels(String::new()));
    }
    if let Some((key, _)) = levels.iter().find(|(_, l)| l.is_empty()) {
        return Err(DesignError::EmptyLevels(key.clone()));
    }
    let total: usize = levels.iter().map(|(_, l)| l.len()).product();
    let mut rows = Vec::with_capacity(total);
    let mut idx = vec![0usize; levels.len()];
    for _ in 0..total {
        rows.push(
            levels
                .iter()
                .zip(&idx)
                .map(|((k, l), &i)| (k.clone(), l[i].clone()))
                .collect(),
        );
        for d in (0..levels.len()).rev() {
            idx[d] += 1;
            if idx[d] < levels[d].1.len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GeneratedFactor {
    pub letter: String,
    /// Product of base letters, e.g. `"AB"`.
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FactorialGenerator {
    pub base_factors: Vec<String>,
    #[serde(default)]
    pub generated: Vec<GeneratedFactor>,
}

impl FactorialGenerator {
    /// All letters, base factors first.
    pub fn letters(&self) -> Vec<&str> {
        self.base_factors
            .iter()
            .map(String::as_str)
            .chain(self.generated.iter().map(|g| g.letter.as_str()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::Generator(m));
        if self.base_factors.is_empty() {
            return bad("at least one base factor required".into());
        }
        let mut seen = BTreeSet::new();
        for l in self.letters() {
            if l.chars().count() != 1 {
                return bad(format!("factor `{l}` must be a single letter"));
            }
            if !seen.insert(l) {
                return bad(format!("factor `{l}` defined twice"));
            }
        }
        for g in &self.generated {
            if g.word.is_empty() {
                return bad(format!("empty defining word for `{}`", g.letter));
            }
            for c in g.word.chars() {
                if !self.base_factors.iter().any(|b| b.starts_with(c)) {
                    return bad(format!(
                        "defining word `{}` uses non-base letter `{c}`",
                        g.word
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Two-level design in coded units; columns follow [`FactorialGenerator::letters`].
pub fn fractional_factorial(generator: &FactorialGenerator) -> Result<Vec<Vec<f64>>, DesignError> {
    generator.validate()?;
    let k = generator.base_factors.len();
    let base = full_factorial(
        &generator
            .base_factors
            .iter()
            .map(|b| (b.clone(), vec![Value::Real(-1.0), Value::Real(1.0)]))
            .collect::<Vec<_>>(),
    )?;
    Ok(base
        .iter()
        .map(|row| {
            let mut out: Vec<f64> = generator
                .base_factors
                .iter()
                .map(|b| row[b].as_real().unwrap())
                .collect();
            for g in &generator.generated {
                let product = g
                    .word
                    .chars()
                    .map(|c| {
                        let i = generator
                            .base_factors
                            .iter()
                            .position(|b| b.starts_with(c))
                            .unwrap();
                        out[i]
                    })
                    .product();
                out.push(product);
            }
            debug_assert_eq!(out.len(), k + generator.generated.len());
            out
        })
        .collect())
}
