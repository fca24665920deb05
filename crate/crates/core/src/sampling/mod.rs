//! Space-filling and random candidate generation over constrained,
//! mixed-type domains.

mod sobol;
mod sobol_table;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Constraint, Domain, Input, InterpointEqualityConstraint, NChooseKConstraint, Proposal, Row,
    Value, DEFAULT_TOL, ZERO_EPS,
};
use crate::union::tagged_union;

pub use sobol::{Sobol, MAX_DIM as SOBOL_MAX_DIM};

/// Draw budget per requested row before sampling gives up.
pub const REJECTIONS_PER_ROW: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct UniformSampler {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SobolSampler {
    pub seed: u64,
    #[serde(default = "yes")]
    pub scramble: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LatinHypercubeSampler {
    pub seed: u64,
}

fn yes() -> bool {
    true
}

tagged_union! {
    pub enum SamplerConfig {
        Uniform(UniformSampler) => "UniformSampler",
        Sobol(SobolSampler) => "SobolSampler",
        LatinHypercube(LatinHypercubeSampler) => "LatinHypercubeSampler",
    }
}

impl SamplerConfig {
    pub fn seed(&self) -> u64 {
        match self {
            SamplerConfig::Uniform(c) => c.seed,
            SamplerConfig::Sobol(c) => c.seed,
            SamplerConfig::LatinHypercube(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SamplerConfig::Uniform(c) => c.seed = seed,
            SamplerConfig::Sobol(c) => c.seed = seed,
            SamplerConfig::LatinHypercube(c) => c.seed = seed,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("Sobol dimension must be in 1..={max}, got {dim}")]
    Dimension { dim: usize, max: usize },
    #[error("only {accepted} of {requested} rows accepted after {draws} draws (acceptance rate {rate:.2e})")]
    Infeasible {
        requested: usize,
        accepted: usize,
        draws: usize,
        rate: f64,
    },
    #[error("NChooseK feature `{0}` cannot be set to zero")]
    Unzeroable(String),
}

/// Mixes seed components into one seed (splitmix64 finalizer per part).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// `n` points of the (optionally scrambled) Sobol sequence in `[0,1)^dim`.
pub fn unit_sobol(
    dim: usize,
    n: usize,
    seed: u64,
    scramble: bool,
) -> Result<Vec<Vec<f64>>, SampleError> {
    let mut s = Sobol::new(dim, scramble.then_some(seed)).ok_or(SampleError::Dimension {
        dim,
        max: SOBOL_MAX_DIM,
    })?;
    Ok((0..n).map(|_| s.next_point()).collect())
}

/// Latin hypercube: one point per stratum `[i/n, (i+1)/n)` in every dimension.
pub fn unit_lhs(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    lhs_with(dim, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn lhs_with(dim: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(rng);
        for (p, &s) in points.iter_mut().zip(&strata) {
            p[d] = ((s as f64 + rng.random::<f64>()) / n as f64).min(1.0 - f64::EPSILON);
        }
    }
    points
}

/// Iid uniform points.
pub fn unit_uniform(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random()).collect())
        .collect()
}

/// Endless stream of unit-cube candidates for rejection sampling.
enum UnitStream {
    Uniform(ChaCha8Rng),
    Sobol(Sobol),
    Lhs {
        rng: ChaCha8Rng,
        block: usize,
        buffer: Vec<Vec<f64>>,
    },
}

impl UnitStream {
    fn new(config: &SamplerConfig, dim: usize, block: usize) -> Result<Self, SampleError> {
        Ok(match config {
            SamplerConfig::Uniform(c) => UnitStream::Uniform(ChaCha8Rng::seed_from_u64(c.seed)),
            SamplerConfig::Sobol(c) => UnitStream::Sobol(
                Sobol::new(dim, c.scramble.then_some(c.seed)).ok_or(SampleError::Dimension {
                    dim,
                    max: SOBOL_MAX_DIM,
                })?,
            ),
            SamplerConfig::LatinHypercube(c) => UnitStream::Lhs {
                rng: ChaCha8Rng::seed_from_u64(c.seed),
                block: block.max(1),
                buffer: Vec::new(),
            },
        })
    }

    fn next(&mut self, dim: usize) -> Vec<f64> {
        match self {
            UnitStream::Uniform(rng) => (0..dim).map(|_| rng.random()).collect(),
            UnitStream::Sobol(s) => s.next_point(),
            UnitStream::Lhs { rng, block, buffer } => {
                if buffer.is_empty() {
                    *buffer = lhs_with(dim, *block, rng);
                    buffer.reverse();
                }
                buffer.pop().expect("refilled")
            }
        }
    }
}

/// Maps a unit-cube point onto the domain's inputs.
pub fn unit_to_row(domain: &Domain, u: &[f64]) -> Row {
    domain
        .inputs
        .iter()
        .zip(u)
        .map(|(input, &u)| {
            let value = match input {
                Input::Continuous(c) => Value::Real(c.lower() + u * (c.upper() - c.lower())),
                Input::Discrete(d) => {
                    let (lo, hi) = (d.values[0], d.values[d.values.len() - 1]);
                    Value::Real(d.nearest(lo + u * (hi - lo)))
                }
                Input::Categorical(c) => {
                    let labels = c.allowed_labels();
                    let i = ((u * labels.len() as f64) as usize).min(labels.len() - 1);
                    Value::from(labels[i])
                }
            };
            (input.key().to_owned(), value)
        })
        .collect()
}

fn check_nchoosek_bounds(domain: &Domain, c: &NChooseKConstraint) -> Result<(), SampleError> {
    for key in &c.features {
        let ok = match domain.input(key) {
            Some(Input::Continuous(ci)) => ci.lower() <= 0.0 && ci.upper() >= 0.0,
            Some(Input::Discrete(d)) => d.values.contains(&0.0),
            _ => false,
        };
        if !ok {
            return Err(SampleError::Unzeroable(key.clone()));
        }
    }
    Ok(())
}

/// Picks how many features stay active and which, zeroing the rest.
/// Active features that landed on zero are redrawn inside their range.
pub fn project_nchoosek(
    domain: &Domain,
    row: &mut Row,
    c: &NChooseKConstraint,
    rng: &mut impl Rng,
) -> Result<(), SampleError> {
    check_nchoosek_bounds(domain, c)?;
    let max = c.max_count.min(c.features.len());
    let min = c.min_count.min(max);
    let k = if c.none_also_valid && rng.random::<bool>() {
        0
    } else {
        rng.random_range(min..=max)
    };
    let active = index::sample(rng, c.features.len(), k);
    let mut is_active = vec![false; c.features.len()];
    for i in active.iter() {
        is_active[i] = true;
    }
    for (key, &on) in c.features.iter().zip(&is_active) {
        if !on {
            row.insert(key.clone(), Value::Real(0.0));
            continue;
        }
        let current = row.get(key).and_then(Value::as_real).unwrap_or(0.0);
        if current.abs() > ZERO_EPS {
            continue;
        }
        let redrawn = match domain.input(key) {
            Some(Input::Continuous(ci)) => {
                let mut x: f64 = 0.0;
                while x.abs() <= ZERO_EPS {
                    x = rng.random_range(ci.lower()..=ci.upper());
                }
                x
            }
            Some(Input::Discrete(d)) => {
                let nonzero: Vec<f64> = d
                    .values
                    .iter()
                    .copied()
                    .filter(|v| v.abs() > ZERO_EPS)
                    .collect();
                nonzero[rng.random_range(0..nonzero.len())]
            }
            _ => unreachable!("checked above"),
        };
        row.insert(key.clone(), Value::Real(redrawn));
    }
    Ok(())
}

/// Copies the first row's value of the feature into every row.
pub fn apply_interpoint(batch: &mut [Row], c: &InterpointEqualityConstraint) {
    let Some(first) = batch.first().and_then(|r| r.get(&c.feature)).cloned() else {
        return;
    };
    for row in batch.iter_mut().skip(1) {
        row.insert(c.feature.clone(), first.clone());
    }
}

/// Samples `n` rows satisfying every domain constraint at tolerance 1e-6.
///
/// `fixed` values override sampled ones in every row. Interpoint-equality
/// features of later rows are pinned to the first row's value before their
/// constraints are checked.
pub fn sample_rows(
    domain: &Domain,
    n: usize,
    config: &SamplerConfig,
    max_rejections: usize,
    fixed: &Row,
) -> Result<Vec<Row>, SampleError> {
    let dim = domain.inputs.len();
    let mut stream = UnitStream::new(config, dim, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed() ^ 0x9e37_79b9_7f4a_7c15);
    let nchoosek: Vec<&NChooseKConstraint> = domain
        .constraints
        .iter()
        .filter_map(|c| match c {
            Constraint::NChooseK(c) => Some(c),
            _ => None,
        })
        .collect();
    for c in &nchoosek {
        check_nchoosek_bounds(domain, c)?;
    }
    let interpoint = domain.interpoint_features();

    let mut rows: Vec<Row> = Vec::with_capacity(n);
    let mut draws = 0usize;
    while rows.len() < n {
        if draws >= max_rejections {
            return Err(SampleError::Infeasible {
                requested: n,
                accepted: rows.len(),
                draws,
                rate: rows.len() as f64 / draws.max(1) as f64,
            });
        }
        draws += 1;
        let mut row = unit_to_row(domain, &stream.next(dim));
        for c in &nchoosek {
            project_nchoosek(domain, &mut row, c, &mut rng)?;
        }
        for (k, v) in fixed {
            row.insert(k.clone(), v.clone());
        }
        if let Some(first) = rows.first() {
            for key in &interpoint {
                if let Some(v) = first.get(*key) {
                    row.insert((*key).to_owned(), v.clone());
                }
            }
        }
        if domain.row_feasible(&row, DEFAULT_TOL) {
            rows.push(row);
        }
    }
    for c in &domain.constraints {
        if let Constraint::InterpointEquality(c) = c {
            apply_interpoint(&mut rows, c);
        }
    }
    Ok(rows)
}

/// [`sample_rows`] wrapped as proposals, with the default draw budget.
pub fn sample(
    domain: &Domain,
    n: usize,
    config: &SamplerConfig,
) -> Result<Vec<Proposal>, SampleError> {
    Ok(sample_rows(
        domain,
        n,
        config,
        REJECTIONS_PER_ROW * n.max(1),
        &Row::new(),
    )?
    .into_iter()
    .map(Proposal::new)
    .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::paint_domain;
    use crate::domain::{
        check_constraint, ContinuousInput, ContinuousOutput, LinearConstraint, Objective,
    };

    #[test]
    fn sobol_reference_values() {
        let pts = unit_sobol(1, 4, 0, false).unwrap();
        assert_eq!(pts, [[0.0], [0.5], [0.75], [0.25]]);
        assert_eq!(unit_sobol(2, 1, 0, false).unwrap(), [[0.0, 0.0]]);
        assert!(unit_sobol(SOBOL_MAX_DIM + 1, 1, 0, false).is_err());
    }

    #[test]
    fn lhs_quartiles() {
        let mut pts: Vec<f64> = unit_lhs(1, 4, 3).into_iter().map(|p| p[0]).collect();
        pts.sort_by(f64::total_cmp);
        for (i, x) in pts.iter().enumerate() {
            assert!(*x >= i as f64 / 4.0 && *x < (i + 1) as f64 / 4.0);
        }
        assert_eq!(unit_lhs(3, 5, 9), unit_lhs(3, 5, 9));
    }

    #[test]
    fn paint_domain_rows() {
        let domain = paint_domain();
        let rows = sample_rows(
            &domain,
            5,
            &SamplerConfig::Sobol(SobolSampler {
                seed: 1,
                scramble: true,
            }),
            50_000,
            &Row::new(),
        )
        .unwrap();
        assert_eq!(rows.len(), 5);
        for row in &rows {
            let active = (0..20)
                .filter(|i| row[&format!("compound_{i}")].as_real().unwrap().abs() > ZERO_EPS)
                .count();
            assert!((1..=5).contains(&active), "{active}");
            assert_eq!(row["temp"], rows[0]["temp"]);
        }
        assert!(domain.batch_feasible(&rows, DEFAULT_TOL));
    }

    #[test]
    fn contradictory_constraints() {
        let domain = Domain::new(
            vec![Input::Continuous(ContinuousInput::new("a", 0.0, 1.0))],
            vec![ContinuousOutput::new("y", Objective::maximize())],
            vec![Constraint::LinearInequality(LinearConstraint {
                features: vec!["a".into()],
                coefficients: vec![1.0],
                rhs: -1.0,
            })],
        );
        let err = sample(
            &domain,
            2,
            &SamplerConfig::Uniform(UniformSampler { seed: 0 }),
        )
        .unwrap_err();
        match err {
            SampleError::Infeasible {
                accepted,
                draws,
                rate,
                ..
            } => {
                assert_eq!((accepted, draws, rate), (0, 20_000, 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nchoosek_projection() {
        let domain = paint_domain();
        let Constraint::NChooseK(c) = &domain.constraints[0] else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut all = c.clone();
        all.min_count = 20;
        all.max_count = 20;
        let mut row = unit_to_row(&domain, &vec![0.0; 21]);
        project_nchoosek(&domain, &mut row, &all, &mut rng).unwrap();
        assert!((0..20).all(|i| row[&format!("compound_{i}")].as_real().unwrap() > ZERO_EPS));

        let mut tight = domain.clone();
        if let Input::Continuous(ci) = &mut tight.inputs[1] {
            ci.bounds = [0.1, 1.0];
        }
        assert!(matches!(
            project_nchoosek(&tight, &mut row, c, &mut rng),
            Err(SampleError::Unzeroable(_))
        ));
    }

    #[test]
    fn interpoint_copies_first_row() {
        let c = InterpointEqualityConstraint {
            feature: "t".into(),
        };
        let mut batch: Vec<Row> = [30.0, 50.0, 70.0]
            .iter()
            .map(|&t| [("t".to_string(), Value::Real(t))].into())
            .collect();
        apply_interpoint(&mut batch, &c);
        assert!(batch.iter().all(|r| r["t"] == Value::Real(30.0)));
        let check =
            check_constraint(&Constraint::InterpointEquality(c), &batch, DEFAULT_TOL).unwrap();
        assert!(check.satisfied);
    }
}
