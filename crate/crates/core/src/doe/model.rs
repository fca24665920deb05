use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::DesignError;
use crate::domain::{Domain, Input, Row, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    LinearWithInteractions,
    Quadratic,
}

/// Regression model behind the design criteria.
///
/// Column order: intercept, main effects (in `over` order), pairwise
/// products `i < j` (interactions and quadratic), squares (quadratic; numeric
/// features only). A categorical feature contributes one dummy column per
/// allowed level after the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub over: Vec<String>,
}

/// One feature's main-effect columns.
enum Effect<'a> {
    Numeric(&'a str),
    Dummies(&'a str, Vec<&'a str>),
}

impl Effect<'_> {
    fn width(&self) -> usize {
        match self {
            Effect::Numeric(_) => 1,
            Effect::Dummies(_, levels) => levels.len(),
        }
    }

    fn columns(&self, row: &Row) -> Result<Vec<f64>, DesignError> {
        match self {
            Effect::Numeric(k) => Ok(vec![row
                .get(*k)
                .and_then(Value::as_real)
                .ok_or_else(|| DesignError::MissingColumn(k.to_string()))?]),
            Effect::Dummies(k, levels) => {
                let label = row
                    .get(*k)
                    .and_then(Value::as_label)
                    .ok_or_else(|| DesignError::MissingColumn(k.to_string()))?;
                Ok(levels
                    .iter()
                    .map(|l| f64::from(u8::from(*l == label)))
                    .collect())
            }
        }
    }
}

impl ModelSpec {
    pub fn validate(&self, domain: &Domain) -> Result<(), DesignError> {
        if self.over.is_empty() {
            return Err(DesignError::Model(
                "model needs at least one feature".into(),
            ));
        }
        for (i, k) in self.over.iter().enumerate() {
            if domain.input(k).is_none() {
                return Err(DesignError::Model(format!("unknown feature `{k}`")));
            }
            if self.over[..i].contains(k) {
                return Err(DesignError::Model(format!("feature `{k}` listed twice")));
            }
        }
        Ok(())
    }

    fn effects<'a>(&'a self, domain: Option<&'a Domain>) -> Vec<Effect<'a>> {
        self.over
            .iter()
            .map(|k| match domain.and_then(|d| d.input(k)) {
                Some(Input::Categorical(c)) => {
                    Effect::Dummies(k, c.allowed_labels().into_iter().skip(1).collect())
                }
                _ => Effect::Numeric(k),
            })
            .collect()
    }

    /// Number of model columns.
    pub fn n_terms(&self, domain: Option<&Domain>) -> usize {
        let effects = self.effects(domain);
        let mains: usize = effects.iter().map(Effect::width).sum();
        let mut n = 1 + mains;
        if self.kind != ModelKind::Linear {
            for i in 0..effects.len() {
                for j in i + 1..effects.len() {
                    n += effects[i].width() * effects[j].width();
                }
            }
        }
        if self.kind == ModelKind::Quadratic {
            n += effects
                .iter()
                .filter(|e| matches!(e, Effect::Numeric(_)))
                .count();
        }
        n
    }
}

/// Expands rows into the model matrix. Values are used as given; pass coded
/// rows for coded-unit criteria. `domain` supplies categorical levels.
pub fn model_matrix(
    spec: &ModelSpec,
    domain: Option<&Domain>,
    rows: &[Row],
) -> Result<DMatrix<f64>, DesignError> {
    let effects = spec.effects(domain);
    let n_terms = spec.n_terms(domain);
    let mut x = DMatrix::zeros(rows.len(), n_terms);
    for (r, row) in rows.iter().enumerate() {
        let mains = effects
            .iter()
            .map(|e| e.columns(row))
            .collect::<Result<Vec<_>, _>>()?;
        let mut terms = Vec::with_capacity(n_terms);
        terms.push(1.0);
        terms.extend(mains.iter().flatten());
        if spec.kind != ModelKind::Linear {
            for i in 0..mains.len() {
                for j in i + 1..mains.len() {
                    for a in &mains[i] {
                        for b in &mains[j] {
                            terms.push(a * b);
                        }
                    }
                }
            }
        }
        if spec.kind == ModelKind::Quadratic {
            for (e, m) in effects.iter().zip(&mains) {
                if let Effect::Numeric(_) = e {
                    terms.push(m[0] * m[0]);
                }
            }
        }
        for (c, t) in terms.into_iter().enumerate() {
            x[(r, c)] = t;
        }
    }
    Ok(x)
}
