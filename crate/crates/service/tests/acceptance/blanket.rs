//! Every strategy on every fixture domain proposes only feasible rows.

use kiln_core::doe::{
    Criterion, DesignConfig, FactorialGenerator, FractionalFactorialDesign, FullFactorialDesign,
    GeneratedFactor, ModelKind, ModelSpec, OptimalDesignConfig,
};
use kiln_core::domain::{
    CategoricalInput, CloseToTargetObjective, Constraint, ContinuousInput, ContinuousOutput,
    DiscreteInput, Domain, Experiment, ExperimentTable, Expression, Input,
    InterpointEqualityConstraint, LinearConstraint, NChooseKConstraint, NonlinearConstraint,
    Objective, Row, SigmoidObjective,
};
use kiln_core::sampling::{
    sample, LatinHypercubeSampler, SamplerConfig, SobolSampler, UniformSampler,
};
use kiln_core::strategy::{
    AcqOptConfig, AcquisitionConfig, AlwaysCondition, DoEStrategy, ExpectedImprovement,
    LogExpectedImprovement, MoboEhvi, MoboParEgo, NumberOfExperimentsCondition, RandomStrategy,
    SoboStrategy, Step, StepCondition, StepwiseStrategy, StrategyConfig, StrategyState,
    UpperConfidenceBound,
};
use kiln_core::wire;

use crate::checks::{batch_violations, synthetic_outputs, ACTIVE_EPS};
use crate::common::PAINT_DOMAIN;
use crate::{ensure, Outcome};

fn continuous(key: &str, lo: f64, hi: f64) -> Input {
    Input::Continuous(ContinuousInput::new(key, lo, hi))
}

/// Mixed input types, a linear and a nonlinear inequality, a shared
/// coordinate and a sigmoid feasibility output.
fn mixed() -> Domain {
    Domain::new(
        vec![
            continuous("x0", 0.0, 1.0),
            continuous("x1", 0.0, 2.0),
            continuous("x2", -1.0, 1.0),
            Input::Discrete(DiscreteInput {
                key: "d".into(),
                values: vec![0.0, 0.5, 1.0, 2.0],
            }),
            Input::Categorical(CategoricalInput {
                key: "c".into(),
                categories: vec!["red".into(), "green".into(), "blue".into()],
                allowed: Some(vec![true, false, true]),
            }),
        ],
        vec![
            ContinuousOutput::new("y1", Objective::maximize()),
            ContinuousOutput::new("y2", Objective::minimize()),
            ContinuousOutput::new(
                "ok",
                Objective::MaximizeSigmoid(SigmoidObjective {
                    steepness: 5.0,
                    threshold: -0.5,
                }),
            ),
        ],
        vec![
            Constraint::LinearInequality(LinearConstraint {
                features: vec!["x0".into(), "x1".into()],
                coefficients: vec![1.0, 1.0],
                rhs: 1.5,
            }),
            Constraint::NonlinearInequality(NonlinearConstraint {
                expression: Expression::parse("x0 * x1 - 0.5").unwrap(),
            }),
            Constraint::InterpointEquality(InterpointEqualityConstraint {
                feature: "x2".into(),
            }),
        ],
    )
}

/// Five components, two or three active, bounded total.
fn mixture() -> Domain {
    let components = ["a", "b", "c", "d", "e"];
    let mut inputs: Vec<Input> = components.iter().map(|k| continuous(k, 0.0, 1.0)).collect();
    inputs.push(continuous("temp", 20.0, 80.0));
    Domain::new(
        inputs,
        vec![
            ContinuousOutput::new(
                "strength",
                Objective::CloseToTarget(CloseToTargetObjective {
                    target_value: 1.0,
                    exponent: 2.0,
                    weight: 1.0,
                }),
            ),
            ContinuousOutput::new("cost", Objective::minimize()),
        ],
        vec![
            Constraint::NChooseK(NChooseKConstraint {
                features: components.iter().map(|s| s.to_string()).collect(),
                min_count: 2,
                max_count: 3,
                none_also_valid: false,
            }),
            Constraint::LinearInequality(LinearConstraint {
                features: components.iter().map(|s| s.to_string()).collect(),
                coefficients: vec![1.0; 5],
                rhs: 2.0,
            }),
        ],
    )
}

fn optimizer(seed: u64) -> AcqOptConfig {
    AcqOptConfig {
        n_raw: 128,
        n_restarts: 2,
        max_polish_iters: 30,
        seed,
    }
}

fn predictive(seed: u64) -> Vec<(&'static str, StrategyConfig)> {
    let sobo = |acquisition| {
        StrategyConfig::Sobo(SoboStrategy {
            acquisition,
            optimizer: optimizer(seed),
            seed,
            fit_restarts: 1,
            ..SoboStrategy::default()
        })
    };
    vec![
        (
            "sobo-ei",
            sobo(AcquisitionConfig::Ei(ExpectedImprovement {})),
        ),
        (
            "sobo-logei",
            sobo(AcquisitionConfig::LogEi(LogExpectedImprovement {})),
        ),
        (
            "sobo-ucb",
            sobo(AcquisitionConfig::Ucb(UpperConfidenceBound { beta: 2.0 })),
        ),
        (
            "parego",
            StrategyConfig::ParEgo(MoboParEgo {
                optimizer: optimizer(seed),
                seed,
                fit_restarts: 1,
                ..MoboParEgo::default()
            }),
        ),
        (
            "ehvi",
            StrategyConfig::Ehvi(MoboEhvi {
                optimizer: optimizer(seed),
                seed,
                fit_restarts: 1,
                mc_samples: 64,
                ..MoboEhvi::default()
            }),
        ),
        (
            "stepwise",
            StrategyConfig::Stepwise(StepwiseStrategy {
                steps: vec![
                    Step {
                        condition: StepCondition::NumberOfExperiments(
                            NumberOfExperimentsCondition { below: 12 },
                        ),
                        strategy: StrategyConfig::Random(RandomStrategy {
                            sampler: SamplerConfig::Sobol(SobolSampler {
                                seed,
                                scramble: true,
                            }),
                        }),
                    },
                    Step {
                        condition: StepCondition::Always(AlwaysCondition {}),
                        strategy: sobo(AcquisitionConfig::LogEi(LogExpectedImprovement {})),
                    },
                ],
            }),
        ),
    ]
}

fn samplers(seed: u64) -> Vec<(&'static str, StrategyConfig)> {
    let random = |sampler| StrategyConfig::Random(RandomStrategy { sampler });
    vec![
        (
            "uniform",
            random(SamplerConfig::Uniform(UniformSampler { seed })),
        ),
        (
            "sobol",
            random(SamplerConfig::Sobol(SobolSampler {
                seed,
                scramble: true,
            })),
        ),
        (
            "lhs",
            random(SamplerConfig::LatinHypercube(LatinHypercubeSampler {
                seed,
            })),
        ),
    ]
}

fn optimal(over: &[&str], kind: ModelKind, criterion: Criterion) -> StrategyConfig {
    let mut config = OptimalDesignConfig::new(
        ModelSpec {
            kind,
            over: over.iter().map(|s| s.to_string()).collect(),
        },
        criterion,
        7,
    );
    config.n_restarts = 2;
    config.max_passes = 5;
    StrategyConfig::DoE(DoEStrategy {
        design: DesignConfig::Optimal(config),
    })
}

fn designs(name: &str) -> Vec<(&'static str, StrategyConfig)> {
    let doe = |design| StrategyConfig::DoE(DoEStrategy { design });
    match name {
        "mixed" => vec![
            (
                "full-factorial",
                doe(DesignConfig::FullFactorial(FullFactorialDesign {
                    levels: 3,
                })),
            ),
            (
                "fractional-factorial",
                doe(DesignConfig::FractionalFactorial(
                    FractionalFactorialDesign {
                        generator: FactorialGenerator {
                            base_factors: vec!["A".into(), "B".into()],
                            generated: vec![GeneratedFactor {
                                letter: "C".into(),
                                word: "AB".into(),
                            }],
                        },
                        features: vec!["x0".into(), "x1".into(), "d".into()],
                    },
                )),
            ),
            (
                "d-optimal",
                optimal(
                    &["x0", "x1", "c"],
                    ModelKind::LinearWithInteractions,
                    Criterion::D,
                ),
            ),
        ],
        "mixture" => vec![
            (
                "full-factorial",
                doe(DesignConfig::FullFactorial(FullFactorialDesign {
                    levels: 2,
                })),
            ),
            (
                "a-optimal",
                optimal(&["a", "b", "temp"], ModelKind::Linear, Criterion::A),
            ),
        ],
        _ => vec![(
            "d-optimal",
            optimal(
                &["compound_0", "compound_1", "compound_2"],
                ModelKind::Linear,
                Criterion::D,
            ),
        )],
    }
}

fn measure(domain: &Domain, rows: &[Row]) -> ExperimentTable {
    ExperimentTable::new(
        rows.iter()
            .map(|r| Experiment {
                inputs: r.clone(),
                outputs: synthetic_outputs(domain, r),
            })
            .collect(),
    )
}

struct Tally {
    proposals: usize,
    batches: usize,
    strategies: std::collections::BTreeSet<&'static str>,
    max_active: usize,
    min_active: usize,
}

/// Asks `rounds` batches of `batch` rows, telling each one back.
fn exercise(
    domain: &Domain,
    label: (&str, &'static str),
    config: StrategyConfig,
    warm: usize,
    batch: usize,
    rounds: usize,
    tally: &mut Tally,
) -> Result<(), String> {
    let mut state =
        StrategyState::new(config, domain.clone()).map_err(|e| format!("{label:?}: {e:?}"))?;
    if warm > 0 {
        let init = sample(
            domain,
            warm,
            &SamplerConfig::LatinHypercube(LatinHypercubeSampler { seed: 99 }),
        )
        .map_err(|e| e.to_string())?;
        let rows: Vec<Row> = init.into_iter().map(|p| p.inputs).collect();
        state
            .tell(&measure(domain, &rows))
            .map_err(|e| format!("{e:?}"))?;
    }
    for round in 0..rounds {
        let proposals = state
            .ask(batch)
            .map_err(|e| format!("{label:?} round {round}: {e}"))?;
        ensure!(
            proposals.len() == batch,
            "{label:?}: asked {batch}, got {}",
            proposals.len()
        );
        let rows: Vec<Row> = proposals.into_iter().map(|p| p.inputs).collect();
        let bad = batch_violations(domain, &rows);
        ensure!(
            bad.is_empty(),
            "{label:?} round {round}: {}",
            bad.join("; ")
        );
        if label.0 == "paint" {
            for r in &rows {
                let active = (0..20)
                    .filter(|i| r[&format!("compound_{i}")].as_real().unwrap().abs() > ACTIVE_EPS)
                    .count();
                tally.max_active = tally.max_active.max(active);
                tally.min_active = tally.min_active.min(active);
            }
        }
        tally.proposals += rows.len();
        tally.batches += 1;
        tally.strategies.insert(label.1);
        state
            .tell(&measure(domain, &rows))
            .map_err(|e| format!("{e:?}"))?;
    }
    Ok(())
}

pub fn run() -> Outcome {
    let paint: Domain = wire::deserialize(PAINT_DOMAIN).map_err(|e| e.to_string())?;
    let fixtures = [("paint", paint), ("mixed", mixed()), ("mixture", mixture())];
    let mut tally = Tally {
        proposals: 0,
        batches: 0,
        strategies: Default::default(),
        max_active: 0,
        min_active: usize::MAX,
    };
    for (seed, (name, domain)) in fixtures.iter().enumerate() {
        let seed = seed as u64;
        for (label, config) in samplers(seed) {
            exercise(domain, (name, label), config, 0, 60, 19, &mut tally)?;
        }
        for (label, config) in designs(name) {
            exercise(domain, (name, label), config, 0, 12, 8, &mut tally)?;
        }
        for (label, config) in predictive(seed) {
            exercise(domain, (name, label), config, 8, 4, 3, &mut tally)?;
        }
    }
    ensure!(
        tally.proposals >= 10_000,
        "only {} proposals",
        tally.proposals
    );
    ensure!(
        (1..=5).contains(&tally.min_active) && (1..=5).contains(&tally.max_active),
        "paint NChooseK active counts span {}..={}",
        tally.min_active,
        tally.max_active
    );
    Ok(format!(
        "{} proposals in {} batches from {} strategies on 3 fixture domains, all feasible at 1e-6; paint active compounds {}..={}",
        tally.proposals,
        tally.batches,
        tally.strategies.len(),
        tally.min_active,
        tally.max_active
    ))
}
