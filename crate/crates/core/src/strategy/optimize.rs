//! Inner optimizer for acquisition functions over constrained domains.

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{Constraint, Domain, Input, Row, Value, DEFAULT_TOL, ZERO_EPS};
use crate::sampling::{sample_rows, SampleError, SamplerConfig, SobolSampler, REJECTIONS_PER_ROW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AcqOptConfig {
    #[serde(default = "default_raw")]
    pub n_raw: usize,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Acquisition evaluations allowed per polished restart.
    #[serde(default = "default_polish")]
    pub max_polish_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_raw() -> usize {
    1024
}

fn default_restarts() -> usize {
    8
}

fn default_polish() -> usize {
    200
}

impl Default for AcqOptConfig {
    fn default() -> Self {
        Self {
            n_raw: default_raw(),
            n_restarts: default_restarts(),
            max_polish_iters: default_polish(),
            seed: 0,
        }
    }
}

/// Smallest magnitude an active NChooseK feature may take while polishing.
const ACTIVE_FLOOR: f64 = 1e-6;
/// Golden-section evaluations per line search.
const LINE_EVALS: usize = 16;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn cmp_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

struct Polisher<'a, F> {
    acq: &'a F,
    domain: &'a Domain,
    frozen: Vec<&'a str>,
    budget: usize,
}

impl<F: Fn(&Row) -> f64 + Sync> Polisher<'_, F> {
    /// Feasible interval for a continuous coordinate given the others.
    fn interval(&self, row: &Row, key: &str, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (lo, hi);
        for c in &self.domain.constraints {
            match c {
                Constraint::LinearInequality(lc) => {
                    let Some(pos) = lc.features.iter().position(|f| f == key) else {
                        continue;
                    };
                    let a = lc.coefficients[pos];
                    if a == 0.0 {
                        continue;
                    }
                    let rest: f64 = lc
                        .features
                        .iter()
                        .zip(&lc.coefficients)
                        .filter(|(f, _)| f.as_str() != key)
                        .map(|(f, coef)| coef * row.get(f).and_then(Value::as_real).unwrap_or(0.0))
                        .sum();
                    let bound = (lc.rhs - rest) / a;
                    if a > 0.0 {
                        hi = hi.min(bound);
                    } else {
                        lo = lo.max(bound);
                    }
                }
                Constraint::NChooseK(nc) if nc.features.iter().any(|f| f == key) => {
                    let x = row.get(key).and_then(Value::as_real).unwrap_or(0.0);
                    if x > 0.0 {
                        lo = lo.max(ACTIVE_FLOOR);
                    } else {
                        hi = hi.min(-ACTIVE_FLOOR);
                    }
                }
                _ => {}
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn try_value(&self, row: &Row, key: &str, v: Value, evals: &mut usize) -> Option<(Row, f64)> {
        let mut cand = row.clone();
        cand.insert(key.to_owned(), v);
        if !self.domain.row_feasible(&cand, DEFAULT_TOL) {
            return None;
        }
        *evals += 1;
        let value = (self.acq)(&cand);
        Some((cand, value))
    }

    fn polish(&self, start: Row, start_value: f64) -> (Row, f64) {
        let mut row = start;
        let mut value = start_value;
        let mut evals = 0;
        'rounds: loop {
            let mut improved = false;
            for input in &self.domain.inputs {
                let key = input.key();
                if self.frozen.contains(&key) {
                    continue;
                }
                if evals >= self.budget {
                    break 'rounds;
                }
                let current = row[key].clone();
                let mut best: Option<(Row, f64)> = None;
                let mut consider = |cand: Option<(Row, f64)>| {
                    if let Some((r, v)) = cand {
                        if v > value && best.as_ref().is_none_or(|b| v > b.1) {
                            best = Some((r, v));
                        }
                    }
                };
                match input {
                    Input::Continuous(c) => {
                        let x0 = current.as_real().unwrap_or(c.lower());
                        let is_inactive = x0.abs() <= ZERO_EPS
                            && self
                                .domain
                                .constraints
                                .iter()
                                .any(|k| matches!(k, Constraint::NChooseK(n) if n.features.iter().any(|f| f == key)));
                        if is_inactive {
                            continue;
                        }
                        let Some((lo, hi)) = self.interval(&row, key, c.lower(), c.upper()) else {
                            continue;
                        };
                        if hi - lo <= 1e-12 {
                            continue;
                        }
                        // golden-section search for the maximum on [lo, hi]
                        let (mut a, mut b) = (lo, hi);
                        let mut x1 = b - INV_PHI * (b - a);
                        let mut x2 = a + INV_PHI * (b - a);
                        let mut f = |x: f64, evals: &mut usize| {
                            let cand = self.try_value(&row, key, Value::Real(x), evals);
                            let v = cand.as_ref().map_or(f64::NEG_INFINITY, |c| c.1);
                            consider(cand);
                            v
                        };
                        let mut f1 = f(x1, &mut evals);
                        let mut f2 = f(x2, &mut evals);
                        for _ in 0..LINE_EVALS.saturating_sub(2) {
                            if evals >= self.budget {
                                break;
                            }
                            if f1 >= f2 {
                                b = x2;
                                x2 = x1;
                                f2 = f1;
                                x1 = b - INV_PHI * (b - a);
                                f1 = f(x1, &mut evals);
                            } else {
                                a = x1;
                                x1 = x2;
                                f1 = f2;
                                x2 = a + INV_PHI * (b - a);
                                f2 = f(x2, &mut evals);
                            }
                        }
                        for edge in [lo, hi] {
                            if evals < self.budget {
                                f(edge, &mut evals);
                            }
                        }
                    }
                    Input::Discrete(d) => {
                        let x0 = current.as_real().unwrap_or(d.values[0]);
                        let i = d.values.iter().position(|&v| v == x0).unwrap_or(0);
                        for j in [i.wrapping_sub(1), i + 1] {
                            if let Some(&v) = d.values.get(j) {
                                consider(self.try_value(&row, key, Value::Real(v), &mut evals));
                            }
                        }
                    }
                    Input::Categorical(c) => {
                        for label in c.allowed_labels() {
                            if current.as_label() != Some(label) {
                                consider(self.try_value(&row, key, Value::from(label), &mut evals));
                            }
                        }
                    }
                }
                if let Some((r, v)) = best {
                    row = r;
                    value = v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        (row, value)
    }
}

/// Maximizes `acq` over feasible rows.
///
/// Draws `n_raw` feasible rows from a scrambled Sobol sequence, keeps the
/// best `n_restarts`, and polishes each by coordinate ascent: golden-section
/// line searches for continuous inputs on intervals clipped by bounds and
/// linear inequalities, neighbour moves for discrete inputs, all allowed
/// labels for categoricals. Features in `fixed`, features in equality
/// constraints and inactive NChooseK features stay put. Ties go to the
/// lowest index.
pub fn optimize_acquisition<F>(
    acq: &F,
    domain: &Domain,
    opt: &AcqOptConfig,
    fixed: &Row,
    seed: u64,
) -> Result<(Row, f64), SampleError>
where
    F: Fn(&Row) -> f64 + Sync,
{
    // raw candidates are independent; interpoint sharing comes from `fixed`
    let mut free = domain.clone();
    free.constraints
        .retain(|c| !matches!(c, Constraint::InterpointEquality(_)));
    let sampler = SamplerConfig::Sobol(SobolSampler {
        seed,
        scramble: true,
    });
    let n_raw = opt.n_raw.max(1);
    let raw = sample_rows(&free, n_raw, &sampler, REJECTIONS_PER_ROW * n_raw, fixed)?;
    let scores: Vec<f64> = raw.par_iter().map(acq).collect();

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| cmp_desc(scores[a], scores[b]).then(a.cmp(&b)));
    order.truncate(opt.n_restarts.clamp(1, raw.len()));

    let mut frozen: Vec<&str> = fixed.keys().map(String::as_str).collect();
    for c in &domain.constraints {
        match c {
            Constraint::LinearEquality(_) | Constraint::NonlinearEquality(_) => {
                frozen.extend(c.features())
            }
            Constraint::InterpointEquality(_) => {}
            _ => {}
        }
    }
    let polisher = Polisher {
        acq,
        domain: &free,
        frozen,
        budget: opt.max_polish_iters,
    };
    let polished: Vec<(Row, f64)> = order
        .par_iter()
        .map(|&i| {
            let (row, value) = polisher.polish(raw[i].clone(), scores[i]);
            if domain.row_feasible(&row, DEFAULT_TOL) {
                (row, value)
            } else {
                (raw[i].clone(), scores[i])
            }
        })
        .collect();
    let best = (0..polished.len())
        .min_by(|&a, &b| cmp_desc(polished[a].1, polished[b].1).then(a.cmp(&b)))
        .expect("at least one restart");
    Ok(polished.into_iter().nth(best).expect("index in range"))
}
