use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Input, Row, Value};
use crate::union::tagged_union;

/// Affine map of a numeric input onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScaledFeature {
    pub key: String,
    pub lower: f64,
    pub upper: f64,
}

/// One column per allowed label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OneHotFeature {
    pub key: String,
    pub labels: Vec<String>,
}

tagged_union! {
    pub enum FeatureEncoding {
        Scaled(ScaledFeature) => "ScaledFeature",
        OneHot(OneHotFeature) => "OneHotFeature",
    }
}

impl FeatureEncoding {
    pub fn key(&self) -> &str {
        match self {
            FeatureEncoding::Scaled(s) => &s.key,
            FeatureEncoding::OneHot(o) => &o.key,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoding::Scaled(_) => 1,
            FeatureEncoding::OneHot(o) => o.labels.len(),
        }
    }
}

/// Encoded columns follow the domain's input order; a categorical input
/// expands to a block of one-hot columns in allowed-label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct InputEncoding {
    pub features: Vec<FeatureEncoding>,
}

impl InputEncoding {
    pub fn from_domain(domain: &Domain) -> Self {
        Self {
            features: domain
                .inputs
                .iter()
                .map(|input| match input {
                    Input::Categorical(c) => FeatureEncoding::OneHot(OneHotFeature {
                        key: c.key.clone(),
                        labels: c.allowed_labels().into_iter().map(str::to_owned).collect(),
                    }),
                    other => {
                        let (lower, upper) = other.numeric_range().expect("numeric input");
                        FeatureEncoding::Scaled(ScaledFeature {
                            key: other.key().to_owned(),
                            lower,
                            upper,
                        })
                    }
                })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.features.iter().map(FeatureEncoding::width).sum()
    }

    pub fn encode_row(&self, row: &Row) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.features {
            match f {
                FeatureEncoding::Scaled(s) => {
                    let x = row.get(&s.key).and_then(Value::as_real).unwrap_or(f64::NAN);
                    let span = s.upper - s.lower;
                    out.push(if span > 0.0 {
                        (x - s.lower) / span
                    } else {
                        0.0
                    });
                }
                FeatureEncoding::OneHot(o) => {
                    let label = row.get(&o.key).and_then(Value::as_label);
                    out.extend(
                        o.labels
                            .iter()
                            .map(|l| f64::from(u8::from(Some(l.as_str()) == label))),
                    );
                }
            }
        }
        out
    }

    pub fn encode(&self, rows: &[Row]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.encode_row(r)).collect()
    }
}
