use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{model_matrix, DesignError, ModelSpec};
use crate::domain::{Domain, Input, Row, Value, DEFAULT_TOL};
use crate::sampling::{
    derive_seed, sample_rows, SamplerConfig, UniformSampler, REJECTIONS_PER_ROW,
};

/// Optimality criterion. Only D and A are supported; other letters are
/// rejected when parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    D,
    A,
}

impl Criterion {
    pub fn parse(s: &str) -> Result<Self, DesignError> {
        match s {
            "D" => Ok(Criterion::D),
            "A" => Ok(Criterion::A),
            other => Err(DesignError::UnsupportedCriterion(other.to_owned())),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::D => "D",
            Criterion::A => "A",
        })
    }
}

impl Serialize for Criterion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Criterion::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for Criterion {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Criterion".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({ "type": "string", "enum": ["D", "A"] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OptimalDesignConfig {
    pub model: ModelSpec,
    pub criterion: Criterion,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Candidate grid points per continuous coordinate.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_passes")]
    pub max_passes: usize,
}

fn default_restarts() -> usize {
    8
}

fn default_grid() -> usize {
    21
}

fn default_passes() -> usize {
    50
}

impl OptimalDesignConfig {
    pub fn new(model: ModelSpec, criterion: Criterion, seed: u64) -> Self {
        Self {
            model,
            criterion,
            seed,
            n_restarts: default_restarts(),
            grid_points: default_grid(),
            max_passes: default_passes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalDesign {
    pub rows: Vec<Row>,
    /// Criterion value (log-det for D, negative trace of the inverse for A),
    /// ridge included.
    pub value: f64,
}

/// Maps numeric features onto `[-1, 1]`; labels pass through.
pub fn coded_row(domain: &Domain, row: &Row) -> Row {
    row.iter()
        .map(|(k, v)| {
            let coded = match (domain.input(k).and_then(Input::numeric_range), v) {
                (Some((lo, hi)), Value::Real(x)) if hi > lo => {
                    Value::Real(2.0 * (x - lo) / (hi - lo) - 1.0)
                }
                _ => v.clone(),
            };
            (k.clone(), coded)
        })
        .collect()
}

/// Design criterion of an information matrix, with the stabilizing ridge
/// `1e-9 · trace / n_terms`.
pub fn criterion_value(info: &DMatrix<f64>, criterion: Criterion) -> f64 {
    let p = info.nrows();
    let ridge = (1e-9 * info.trace() / p as f64).max(1e-12);
    let m = info + DMatrix::identity(p, p) * ridge;
    let Some(chol) = m.cholesky() else {
        return f64::NEG_INFINITY;
    };
    match criterion {
        Criterion::D => {
            2.0 * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>()
        }
        Criterion::A => -chol.inverse().trace(),
    }
}

fn information(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x
}

fn candidates(input: &Input, current: &Value, grid_points: usize) -> Vec<Value> {
    match input {
        Input::Continuous(c) => {
            let g = grid_points.max(2);
            let mut out: Vec<Value> = (0..g)
                .map(|i| {
                    Value::Real(c.lower() + (c.upper() - c.lower()) * i as f64 / (g - 1) as f64)
                })
                .collect();
            out.push(current.clone());
            out
        }
        Input::Discrete(d) => d.values.iter().map(|&v| Value::Real(v)).collect(),
        Input::Categorical(c) => c.allowed_labels().into_iter().map(Value::from).collect(),
    }
}

struct Exchange<'a> {
    domain: &'a Domain,
    config: &'a OptimalDesignConfig,
    interpoint: Vec<&'a str>,
}

impl Exchange<'_> {
    fn model_row(&self, row: &Row) -> Result<DMatrix<f64>, DesignError> {
        model_matrix(
            &self.config.model,
            Some(self.domain),
            &[coded_row(self.domain, row)],
        )
    }

    fn run(&self, mut rows: Vec<Row>) -> Result<OptimalDesign, DesignError> {
        let crit = self.config.criterion;
        let mut xs = rows
            .iter()
            .map(|r| self.model_row(r))
            .collect::<Result<Vec<_>, _>>()?;
        let mut info = xs
            .iter()
            .map(information)
            .fold(DMatrix::zeros(xs[0].ncols(), xs[0].ncols()), |acc, m| {
                acc + m
            });
        let mut value = criterion_value(&info, crit);

        for _ in 0..self.config.max_passes {
            let mut improved = false;
            for i in 0..rows.len() {
                for key in &self.config.model.over {
                    let shared = self.interpoint.contains(&key.as_str());
                    if shared && i > 0 {
                        continue;
                    }
                    let input = self.domain.input(key).expect("validated model");
                    let mut best: Option<(f64, Value, DMatrix<f64>, Vec<DMatrix<f64>>)> = None;
                    for cand in candidates(input, &rows[i][key], self.config.grid_points) {
                        if cand == rows[i][key] {
                            continue;
                        }
                        let targets: Vec<usize> = if shared {
                            (0..rows.len()).collect()
                        } else {
                            vec![i]
                        };
                        let mut new_info = info.clone();
                        let mut new_xs = Vec::with_capacity(targets.len());
                        let mut feasible = true;
                        for &t in &targets {
                            let mut row = rows[t].clone();
                            row.insert(key.clone(), cand.clone());
                            if !self.domain.row_feasible(&row, DEFAULT_TOL) {
                                feasible = false;
                                break;
                            }
                            let x = self.model_row(&row)?;
                            new_info += information(&x) - information(&xs[t]);
                            new_xs.push(x);
                        }
                        if !feasible {
                            continue;
                        }
                        let v = criterion_value(&new_info, crit);
                        if best.as_ref().is_none_or(|b| v > b.0) {
                            best = Some((v, cand, new_info, new_xs));
                        }
                    }
                    if let Some((v, cand, new_info, new_xs)) = best {
                        let threshold = if value.is_finite() {
                            value + 1e-10 * value.abs()
                        } else {
                            f64::NEG_INFINITY
                        };
                        if v > threshold {
                            debug_assert!(v >= value);
                            let targets: Vec<usize> = if shared {
                                (0..rows.len()).collect()
                            } else {
                                vec![i]
                            };
                            for (&t, x) in targets.iter().zip(new_xs) {
                                rows[t].insert(key.clone(), cand.clone());
                                xs[t] = x;
                            }
                            info = new_info;
                            value = v;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Ok(OptimalDesign { rows, value })
    }
}

/// D- or A-optimal design of `n_runs` rows by coordinate exchange.
///
/// Each restart starts from a feasible random sample and sweeps run by run,
/// coordinate by coordinate over a candidate grid restricted to values that
/// keep the row feasible. An interpoint-equality feature is exchanged for all
/// runs at once. Restarts run in parallel; the best value wins, ties going to
/// the lowest restart index.
pub fn optimal_design(
    domain: &Domain,
    config: &OptimalDesignConfig,
    n_runs: usize,
) -> Result<OptimalDesign, DesignError> {
    config.model.validate(domain)?;
    let n_terms = config.model.n_terms(Some(domain));
    if n_runs < n_terms {
        return Err(DesignError::TooFewRuns { n_runs, n_terms });
    }
    let exchange = Exchange {
        domain,
        config,
        interpoint: domain.interpoint_features(),
    };
    let results: Vec<Result<OptimalDesign, DesignError>> = (0..config.n_restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let sampler = SamplerConfig::Uniform(UniformSampler {
                seed: derive_seed(&[config.seed, r as u64]),
            });
            let start = sample_rows(
                domain,
                n_runs,
                &sampler,
                REJECTIONS_PER_ROW * n_runs,
                &Row::new(),
            )?;
            exchange.run(start)
        })
        .collect();
    let mut best: Option<OptimalDesign> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}
