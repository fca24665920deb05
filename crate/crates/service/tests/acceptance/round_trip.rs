//! Random valid documents of every kind survive serialize → deserialize →
//! serialize unchanged, and together they use every discriminator.

use std::collections::{BTreeMap, BTreeSet};

use kiln_core::campaign::{Campaign, ProposalRecord};
use kiln_core::doe::{
    Criterion, DesignConfig, FactorialGenerator, FractionalFactorialDesign, FullFactorialDesign,
    GeneratedFactor, ModelKind, ModelSpec, OptimalDesignConfig,
};
use kiln_core::domain::{
    CategoricalInput, CloseToTargetObjective, Constraint, ContinuousInput, ContinuousOutput,
    DiscreteInput, Domain, Experiment, ExperimentTable, Expression, Input,
    InterpointEqualityConstraint, LinearConstraint, LinearObjective, NChooseKConstraint,
    NonlinearConstraint, Objective, Prediction, Proposal, ProposalTable, Row, SigmoidObjective,
    Value,
};
use kiln_core::gp::{fit_targets, FitConfig, Kernel, Matern52Kernel, RbfKernel, TrainedGp};
use kiln_core::sampling::{LatinHypercubeSampler, SamplerConfig, SobolSampler, UniformSampler};
use kiln_core::strategy::{
    AcqOptConfig, AcquisitionConfig, AlwaysCondition, DoEStrategy, ExpectedImprovement,
    LogExpectedImprovement, MoboEhvi, MoboParEgo, NumberOfExperimentsCondition, RandomStrategy,
    SoboStrategy, Step, StepCondition, StepwiseStrategy, StrategyConfig, StrategyState,
    UpperConfidenceBound,
};
use kiln_core::wire::{self, schema::all_discriminators, Entity};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value as Json;

use crate::{ensure, Outcome};

const EXPRESSIONS: [&str; 5] = [
    "x0 * x1 - 2.5",
    "x0^2 + x1^2 - 9",
    "sin(x0) + cos(x2) / 2 - 1",
    "exp(x1 / 10) - sqrt(abs(x2) + 1)",
    "-(x2 - 1) * (x0 + 0.5)",
];

fn objective(rng: &mut StdRng, sigmoid: bool) -> Objective {
    let weight = rng.random_range(0.1..3.0);
    match rng.random_range(0..if sigmoid { 5 } else { 3 }) {
        0 => Objective::Maximize(LinearObjective { weight }),
        1 => Objective::Minimize(LinearObjective { weight }),
        2 => Objective::CloseToTarget(CloseToTargetObjective {
            target_value: rng.random_range(-2.0..2.0),
            exponent: rng.random_range(1.0..3.0),
            weight,
        }),
        k => {
            let s = SigmoidObjective {
                steepness: rng.random_range(0.5..20.0),
                threshold: rng.random_range(-1.0..1.0),
            };
            if k == 3 {
                Objective::MaximizeSigmoid(s)
            } else {
                Objective::MinimizeSigmoid(s)
            }
        }
    }
}

fn domain(rng: &mut StdRng) -> Domain {
    let n_cont = rng.random_range(3..=5);
    let mut inputs: Vec<Input> = (0..n_cont)
        .map(|i| {
            let lo = rng.random_range(-5.0..5.0);
            Input::Continuous(ContinuousInput {
                key: format!("x{i}"),
                bounds: [lo, lo + rng.random_range(0.1..10.0)],
                unit: rng.random_bool(0.3).then(|| "mL".to_owned()),
            })
        })
        .collect();
    if rng.random_bool(0.5) {
        let mut v = rng.random_range(-1.0..1.0);
        let values = (0..rng.random_range(2..6))
            .map(|_| {
                v += rng.random_range(0.1..2.0);
                v
            })
            .collect();
        inputs.push(Input::Discrete(DiscreteInput {
            key: "d".into(),
            values,
        }));
    }
    if rng.random_bool(0.5) {
        let k = rng.random_range(2..5);
        let allowed = rng.random_bool(0.5).then(|| {
            let mut mask: Vec<bool> = (0..k).map(|_| rng.random_bool(0.6)).collect();
            mask[0] = true;
            mask
        });
        inputs.push(Input::Categorical(CategoricalInput {
            key: "c".into(),
            categories: (0..k).map(|j| format!("cat_{j}")).collect(),
            allowed,
        }));
    }

    let n_out = rng.random_range(1..=4);
    let outputs = (0..n_out)
        .map(|j| ContinuousOutput::new(format!("y{j}"), objective(rng, j > 0)))
        .collect();

    let mut constraints = Vec::new();
    let linear = |rng: &mut StdRng, a: usize, b: usize| LinearConstraint {
        features: vec![format!("x{a}"), format!("x{b}")],
        coefficients: vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        rhs: rng.random_range(-3.0..3.0),
    };
    if rng.random_bool(0.5) {
        constraints.push(Constraint::LinearInequality(linear(rng, 0, 1)));
    }
    if rng.random_bool(0.3) {
        constraints.push(Constraint::LinearEquality(linear(rng, 1, 2)));
    }
    if rng.random_bool(0.4) {
        let source = EXPRESSIONS[rng.random_range(0..EXPRESSIONS.len())];
        constraints.push(Constraint::NonlinearInequality(NonlinearConstraint {
            expression: Expression::parse(source).unwrap(),
        }));
    }
    if rng.random_bool(0.3) {
        let source = EXPRESSIONS[rng.random_range(0..EXPRESSIONS.len())];
        constraints.push(Constraint::NonlinearEquality(NonlinearConstraint {
            expression: Expression::parse(source).unwrap(),
        }));
    }
    if rng.random_bool(0.4) {
        let max_count = rng.random_range(1..=n_cont);
        constraints.push(Constraint::NChooseK(NChooseKConstraint {
            features: (0..n_cont).map(|i| format!("x{i}")).collect(),
            min_count: rng.random_range(0..=max_count),
            max_count,
            none_also_valid: rng.random_bool(0.5),
        }));
    }
    if rng.random_bool(0.4) {
        constraints.push(Constraint::InterpointEquality(
            InterpointEqualityConstraint {
                feature: format!("x{}", n_cont - 1),
            },
        ));
    }
    let d = Domain::new(inputs, outputs, constraints);
    d.validate().expect("generated domain is valid");
    d
}

fn kernel(rng: &mut StdRng) -> Kernel {
    let ard = rng.random_bool(0.5);
    if rng.random_bool(0.5) {
        Kernel::Rbf(RbfKernel { ard })
    } else {
        Kernel::Matern52(Matern52Kernel { ard })
    }
}

fn optimizer(rng: &mut StdRng) -> AcqOptConfig {
    let n_raw = rng.random_range(8..2048);
    AcqOptConfig {
        n_raw,
        n_restarts: rng.random_range(1..=n_raw.min(16)),
        max_polish_iters: rng.random_range(0..300),
        seed: rng.random(),
    }
}

fn sampler(rng: &mut StdRng) -> SamplerConfig {
    let seed = rng.random();
    match rng.random_range(0..3) {
        0 => SamplerConfig::Uniform(UniformSampler { seed }),
        1 => SamplerConfig::Sobol(SobolSampler {
            seed,
            scramble: rng.random_bool(0.5),
        }),
        _ => SamplerConfig::LatinHypercube(LatinHypercubeSampler { seed }),
    }
}

fn design(rng: &mut StdRng, domain: &Domain) -> DesignConfig {
    match rng.random_range(0..3) {
        0 => DesignConfig::FullFactorial(FullFactorialDesign {
            levels: rng.random_range(2..5),
        }),
        1 => DesignConfig::FractionalFactorial(FractionalFactorialDesign {
            generator: FactorialGenerator {
                base_factors: vec!["A".into(), "B".into()],
                generated: vec![GeneratedFactor {
                    letter: "C".into(),
                    word: "AB".into(),
                }],
            },
            features: vec!["x0".into(), "x1".into(), "x2".into()],
        }),
        _ => {
            let mut over = vec!["x0".to_owned(), "x1".to_owned()];
            over.extend(
                ["d", "c"]
                    .into_iter()
                    .filter(|k| domain.input(k).is_some())
                    .map(str::to_owned),
            );
            let kind = [
                ModelKind::Linear,
                ModelKind::LinearWithInteractions,
                ModelKind::Quadratic,
            ][rng.random_range(0..3)];
            DesignConfig::Optimal(OptimalDesignConfig {
                model: ModelSpec { kind, over },
                criterion: if rng.random_bool(0.5) {
                    Criterion::D
                } else {
                    Criterion::A
                },
                seed: rng.random(),
                n_restarts: rng.random_range(1..10),
                grid_points: rng.random_range(2..30),
                max_passes: rng.random_range(1..60),
            })
        }
    }
}

fn leaf(rng: &mut StdRng, domain: &Domain) -> StrategyConfig {
    let n_obj = domain.objective_outputs().count();
    loop {
        match rng.random_range(0..5) {
            0 => {
                return StrategyConfig::Random(RandomStrategy {
                    sampler: sampler(rng),
                })
            }
            1 => {
                return StrategyConfig::DoE(DoEStrategy {
                    design: design(rng, domain),
                })
            }
            2 => {
                let acquisition = match rng.random_range(0..3) {
                    0 => AcquisitionConfig::Ei(ExpectedImprovement {}),
                    1 => AcquisitionConfig::LogEi(LogExpectedImprovement {}),
                    _ => AcquisitionConfig::Ucb(UpperConfidenceBound {
                        beta: rng.random_range(0.1..10.0),
                    }),
                };
                return StrategyConfig::Sobo(SoboStrategy {
                    acquisition,
                    surrogate: kernel(rng),
                    optimizer: optimizer(rng),
                    seed: rng.random(),
                    fit_restarts: rng.random_range(0..20),
                });
            }
            3 if n_obj >= 2 => {
                return StrategyConfig::ParEgo(MoboParEgo {
                    rho: rng.random_range(0.0..0.2),
                    surrogate: kernel(rng),
                    optimizer: optimizer(rng),
                    seed: rng.random(),
                    fit_restarts: rng.random_range(0..20),
                })
            }
            4 if (2..=4).contains(&n_obj) => {
                return StrategyConfig::Ehvi(MoboEhvi {
                    ref_point: rng
                        .random_bool(0.5)
                        .then(|| (0..n_obj).map(|_| rng.random_range(-2.0..0.0)).collect()),
                    mc_samples: rng.random_range(2..4096),
                    surrogate: kernel(rng),
                    optimizer: optimizer(rng),
                    seed: rng.random(),
                    fit_restarts: rng.random_range(0..20),
                })
            }
            _ => {}
        }
    }
}

fn config(rng: &mut StdRng, domain: &Domain, depth: usize) -> StrategyConfig {
    if depth > 1 || rng.random_bool(0.6) {
        return leaf(rng, domain);
    }
    let n = rng.random_range(1..4);
    let steps = (0..n)
        .map(|i| Step {
            condition: if i + 1 == n {
                StepCondition::Always(AlwaysCondition {})
            } else {
                StepCondition::NumberOfExperiments(NumberOfExperimentsCondition {
                    below: rng.random_range(0..50),
                })
            },
            strategy: config(rng, domain, depth + 1),
        })
        .collect();
    StrategyConfig::Stepwise(StepwiseStrategy { steps })
}

fn row(rng: &mut StdRng, domain: &Domain) -> Row {
    domain
        .inputs
        .iter()
        .map(|input| {
            let v = match input {
                Input::Continuous(c) => Value::Real(rng.random_range(c.bounds[0]..=c.bounds[1])),
                Input::Discrete(d) => Value::Real(d.values[rng.random_range(0..d.values.len())]),
                Input::Categorical(c) => {
                    let labels = c.allowed_labels();
                    Value::from(labels[rng.random_range(0..labels.len())])
                }
            };
            (input.key().to_owned(), v)
        })
        .collect()
}

fn experiments(rng: &mut StdRng, domain: &Domain, n: usize) -> ExperimentTable {
    ExperimentTable::new(
        (0..n)
            .map(|_| Experiment {
                inputs: row(rng, domain),
                outputs: domain
                    .outputs
                    .iter()
                    .filter_map(|o| {
                        rng.random_bool(0.8).then(|| {
                            (
                                o.key.clone(),
                                rng.random_range(-1e3..1e3) * rng.random::<f64>().powi(4),
                            )
                        })
                    })
                    .collect(),
            })
            .collect(),
    )
}

fn proposals(rng: &mut StdRng, domain: &Domain, n: usize) -> Vec<Proposal> {
    (0..n)
        .map(|_| Proposal {
            inputs: row(rng, domain),
            predictions: domain
                .outputs
                .iter()
                .filter(|_| rng.random_bool(0.5))
                .collect::<Vec<_>>()
                .into_iter()
                .map(|o| {
                    let p = Prediction {
                        mean: rng.random_range(-10.0..10.0),
                        std: rng.random_range(0.0..3.0),
                        desirability: rng.random_range(-5.0..1.0),
                    };
                    (o.key.clone(), p)
                })
                .collect(),
        })
        .collect()
}

/// Fitted surrogates for some outputs with at least two measurements.
fn surrogates(
    rng: &mut StdRng,
    domain: &Domain,
    table: &ExperimentTable,
) -> BTreeMap<String, TrainedGp> {
    let mut out = BTreeMap::new();
    for o in &domain.outputs {
        let (rows, y): (Vec<Row>, Vec<f64>) = table
            .rows
            .iter()
            .filter_map(|e| e.outputs.get(&o.key).map(|&y| (e.inputs.clone(), y)))
            .unzip();
        if rows.len() >= 2 && rng.random_bool(0.5) {
            let config = FitConfig {
                seed: rng.random(),
                n_restarts: 0,
            };
            if let Ok(gp) = fit_targets(domain, &rows, &y, &o.key, &kernel(rng), &config) {
                out.insert(o.key.clone(), gp);
            }
        }
    }
    out
}

fn state(rng: &mut StdRng) -> StrategyState {
    let d = domain(rng);
    let mut s =
        StrategyState::new(config(rng, &d, 0), d.clone()).expect("generated state is valid");
    s.experiments = {
        let n = rng.random_range(0..8);
        experiments(rng, &d, n)
    };
    s.surrogates = surrogates(rng, &d, &s.experiments);
    s.ask_count = rng.random_range(0..100);
    s.tell_count = s.experiments.len() as u64;
    s
}

fn campaign(rng: &mut StdRng, i: usize) -> Campaign {
    let d = domain(rng);
    let mut c = Campaign::new(
        format!("campaign-{i:04}"),
        format!("run {i} ✓"),
        d.clone(),
        config(rng, &d, 0),
    )
    .unwrap();
    c.experiments = {
        let n = rng.random_range(0..10);
        experiments(rng, &d, n)
    };
    c.strategy.surrogates = surrogates(rng, &d, &c.experiments);
    c.strategy.ask_count = rng.random_range(0..20);
    c.strategy.tell_count = c.experiments.len() as u64;
    c.proposal_history = (0..rng.random_range(0..4))
        .map(|k| ProposalRecord {
            timestamp: format!("2026-10-{:02}T08:{k:02}:00.000Z", 1 + k),
            proposals: {
                let n = rng.random_range(1..4);
                proposals(rng, &d, n)
            },
        })
        .collect();
    c.revision = rng.random_range(1..1000);
    c
}

fn collect_tags(doc: &Json, tags: &mut BTreeSet<String>) {
    match doc {
        Json::Object(m) => {
            if let Some(Json::String(t)) = m.get("type") {
                tags.insert(t.clone());
            }
            m.values().for_each(|v| collect_tags(v, tags));
        }
        Json::Array(a) => a.iter().for_each(|v| collect_tags(v, tags)),
        _ => {}
    }
}

fn check<T: Entity + PartialEq + std::fmt::Debug>(
    x: &T,
    tags: &mut BTreeSet<String>,
) -> Result<(), String> {
    x.validate_entity()
        .map_err(|e| format!("generated {} is invalid: {e:?}", T::KIND.as_str()))?;
    let text = wire::serialize(x).map_err(|e| e.to_string())?;
    let back: T = wire::deserialize(&text).map_err(|e| format!("{}: {e}", T::KIND.as_str()))?;
    ensure!(
        &back == x,
        "{} changed after a round trip",
        T::KIND.as_str()
    );
    let again = wire::serialize(&back).map_err(|e| e.to_string())?;
    ensure!(
        again == text,
        "{} re-serialized differently",
        T::KIND.as_str()
    );
    collect_tags(&serde_json::from_str(&text).unwrap(), tags);
    Ok(())
}

pub fn run() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut tags = BTreeSet::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut count = |k: &'static str| *counts.entry(k).or_default() += 1;

    for i in 0..700 {
        match i % 7 {
            0 | 1 => {
                check(&domain(&mut rng), &mut tags)?;
                count("domain");
            }
            2 | 3 => {
                check(&state(&mut rng), &mut tags)?;
                count("strategy");
            }
            4 | 5 => {
                check(&campaign(&mut rng, i), &mut tags)?;
                count("campaign");
            }
            _ => {
                let d = domain(&mut rng);
                let table = {
                    let n = rng.random_range(0..12);
                    experiments(&mut rng, &d, n)
                };
                check(&table, &mut tags)?;
                let rows = {
                    let n = rng.random_range(0..5);
                    proposals(&mut rng, &d, n)
                };
                check(&ProposalTable { rows }, &mut tags)?;
                let mut gps = BTreeMap::new();
                while gps.is_empty() {
                    let t = experiments(&mut rng, &d, 6);
                    gps = surrogates(&mut rng, &d, &t);
                }
                for gp in gps.values() {
                    check(gp, &mut tags)?;
                }
                count("experiments");
                count("proposals");
                count("surrogate");
            }
        }
    }

    let mut missing = Vec::new();
    let mut total_tags = 0;
    for (union, variants) in all_discriminators() {
        for v in variants {
            total_tags += 1;
            if !tags.contains(*v) {
                missing.push(format!("{union}::{v}"));
            }
        }
    }
    ensure!(
        missing.is_empty(),
        "variants never generated: {}",
        missing.join(", ")
    );
    let n: usize = counts.values().sum();
    ensure!(n >= 500, "only {n} documents");
    let breakdown: Vec<String> = counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
    Ok(format!(
        "{n} documents ({}), {total_tags}/{total_tags} discriminators covered, all byte-identical",
        breakdown.join(", ")
    ))
}
