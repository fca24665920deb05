//! Synthetic benchmark problems and an ask/tell driver for them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io;

use kiln_core::domain::{
    ContinuousInput, ContinuousOutput, Domain, Experiment, ExperimentTable, Input, Objective, Row,
};
use kiln_core::sampling::{sample, LatinHypercubeSampler, SamplerConfig, UniformSampler};
use kiln_core::strategy::{
    hypervolume, pareto_front, AcqOptConfig, AcquisitionConfig, ExpectedImprovement,
    LogExpectedImprovement, MoboEhvi, MoboParEgo, RandomStrategy, SoboStrategy, StrategyConfig,
    StrategyError, StrategyState, UpperConfidenceBound,
};
use thiserror::Error;

pub const BRANIN_OPTIMUM: f64 = 0.397_887_357_729_738_2;

/// Reference point for ZDT1 hypervolume, in raw (minimized) units.
pub const ZDT1_REFERENCE: [f64; 2] = [11.0, 11.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Branin,
    Zdt1 { dim: usize },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown problem `{0}`; expected branin or zdt1[:DIM]")]
    UnknownProblem(String),
    #[error("unknown strategy preset `{0}`")]
    UnknownStrategy(String),
    #[error("invalid strategy for this problem: {0}")]
    InvalidStrategy(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Problem {
    /// `branin`, `zdt1` (6 inputs) or `zdt1:D`.
    pub fn parse(name: &str) -> Result<Self, BenchError> {
        match name.split_once(':') {
            None if name == "branin" => Ok(Problem::Branin),
            None if name == "zdt1" => Ok(Problem::Zdt1 { dim: 6 }),
            Some(("zdt1", d)) => match d.parse::<usize>() {
                Ok(dim) if dim >= 2 => Ok(Problem::Zdt1 { dim }),
                _ => Err(BenchError::UnknownProblem(name.to_owned())),
            },
            _ => Err(BenchError::UnknownProblem(name.to_owned())),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Problem::Branin => "branin".into(),
            Problem::Zdt1 { dim } => format!("zdt1:{dim}"),
        }
    }

    pub fn domain(&self) -> Domain {
        match *self {
            Problem::Branin => Domain::new(
                vec![
                    Input::Continuous(ContinuousInput::new("x1", -5.0, 10.0)),
                    Input::Continuous(ContinuousInput::new("x2", 0.0, 15.0)),
                ],
                vec![ContinuousOutput::new("y", Objective::minimize())],
                vec![],
            ),
            Problem::Zdt1 { dim } => Domain::new(
                (1..=dim)
                    .map(|i| Input::Continuous(ContinuousInput::new(format!("x{i}"), 0.0, 1.0)))
                    .collect(),
                vec![
                    ContinuousOutput::new("f1", Objective::minimize()),
                    ContinuousOutput::new("f2", Objective::minimize()),
                ],
                vec![],
            ),
        }
    }

    pub fn is_multi_objective(&self) -> bool {
        matches!(self, Problem::Zdt1 { .. })
    }

    /// Input values in domain order.
    pub fn inputs(&self, row: &Row) -> Vec<f64> {
        self.domain()
            .inputs
            .iter()
            .map(|i| row[i.key()].as_real().expect("benchmark inputs are real"))
            .collect()
    }

    pub fn evaluate(&self, row: &Row) -> BTreeMap<String, f64> {
        let x = self.inputs(row);
        match self {
            Problem::Branin => BTreeMap::from([("y".to_owned(), branin(x[0], x[1]))]),
            Problem::Zdt1 { .. } => {
                let (f1, f2) = zdt1(&x);
                BTreeMap::from([("f1".to_owned(), f1), ("f2".to_owned(), f2)])
            }
        }
    }
}

pub fn branin(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn zdt1(x: &[f64]) -> (f64, f64) {
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
    (f1, g * (1.0 - (f1 / g).sqrt()))
}

/// Hypervolume of minimization points against [`ZDT1_REFERENCE`]; points
/// not strictly better than the reference contribute nothing.
pub fn zdt1_hypervolume(points: &[[f64; 2]]) -> f64 {
    // maximize desirabilities -f against -ref
    let reference: Vec<f64> = ZDT1_REFERENCE.iter().map(|r| -r).collect();
    let g: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![-p[0], -p[1]])
        .filter(|q| q.iter().zip(&reference).all(|(a, r)| a > r))
        .collect();
    let front: Vec<Vec<f64>> = pareto_front(&g).into_iter().map(|i| g[i].clone()).collect();
    hypervolume(&front, &reference).expect("filtered points dominate the reference")
}

/// Strategy presets accepted by `--strategy`, with a reduced optimizer
/// budget suited to synthetic problems.
pub const PRESETS: [&str; 6] = [
    "random",
    "sobo-ei",
    "sobo-logei",
    "sobo-ucb",
    "parego",
    "ehvi",
];

pub fn preset(name: &str, seed: u64) -> Result<StrategyConfig, BenchError> {
    let optimizer = AcqOptConfig {
        n_raw: 512,
        n_restarts: 4,
        max_polish_iters: 120,
        seed,
    };
    let sobo = |acquisition| {
        StrategyConfig::Sobo(SoboStrategy {
            acquisition,
            optimizer: optimizer.clone(),
            seed,
            fit_restarts: 4,
            ..SoboStrategy::default()
        })
    };
    Ok(match name {
        "random" => StrategyConfig::Random(RandomStrategy {
            sampler: SamplerConfig::Uniform(UniformSampler { seed }),
        }),
        "sobo-ei" => sobo(AcquisitionConfig::Ei(ExpectedImprovement {})),
        "sobo-logei" => sobo(AcquisitionConfig::LogEi(LogExpectedImprovement {})),
        "sobo-ucb" => sobo(AcquisitionConfig::Ucb(UpperConfidenceBound { beta: 4.0 })),
        "parego" => StrategyConfig::ParEgo(MoboParEgo {
            optimizer,
            seed,
            fit_restarts: 4,
            ..MoboParEgo::default()
        }),
        "ehvi" => StrategyConfig::Ehvi(MoboEhvi {
            optimizer,
            seed,
            fit_restarts: 4,
            ..MoboEhvi::default()
        }),
        other => return Err(BenchError::UnknownStrategy(other.to_owned())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// 1-based evaluation count.
    pub iteration: usize,
    pub initial: bool,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Best observed value (single objective) or dominated hypervolume.
    pub metric: f64,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub problem: Problem,
    pub records: Vec<Record>,
}

impl BenchRun {
    pub fn final_metric(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.metric)
    }

    pub fn summary(&self, strategy: &str, seed: u64) -> String {
        let n = self.records.len();
        match self.problem {
            Problem::Branin => format!(
                "{} {strategy} seed={seed}: best {:.6} after {n} evaluations (optimum {BRANIN_OPTIMUM:.6}, regret {:.6})",
                self.problem.name(),
                self.final_metric(),
                self.final_metric() - BRANIN_OPTIMUM
            ),
            Problem::Zdt1 { .. } => format!(
                "{} {strategy} seed={seed}: hypervolume {:.6} after {n} evaluations (reference {:?})",
                self.problem.name(),
                self.final_metric(),
                ZDT1_REFERENCE
            ),
        }
    }

    /// RFC 4180 CSV: iteration, phase, inputs, outputs, metric.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let domain = self.problem.domain();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_owned(), "phase".to_owned()];
        header.extend(domain.inputs.iter().map(|i| i.key().to_owned()));
        header.extend(domain.outputs.iter().map(|o| o.key.clone()));
        header.push(
            if self.problem.is_multi_objective() {
                "hypervolume"
            } else {
                "best_so_far"
            }
            .to_owned(),
        );
        w.write_record(&header)?;
        for r in &self.records {
            let mut fields = vec![
                r.iteration.to_string(),
                if r.initial { "init" } else { "bo" }.to_owned(),
            ];
            fields.extend(
                r.x.iter()
                    .chain(&r.y)
                    .chain([&r.metric])
                    .map(|v| v.to_string()),
            );
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n_init` Latin-hypercube points, then `iters` single-point asks.
pub fn run(
    problem: Problem,
    config: StrategyConfig,
    n_init: usize,
    iters: usize,
    seed: u64,
) -> Result<BenchRun, BenchError> {
    let domain = problem.domain();
    let mut state = StrategyState::new(config, domain.clone()).map_err(|e| {
        BenchError::InvalidStrategy(
            e.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    let mut records = Vec::with_capacity(n_init + iters);
    let mut observed: Vec<Vec<f64>> = Vec::new();

    let mut record =
        |row: &Row, initial: bool, state: &mut StrategyState| -> Result<(), BenchError> {
            let outputs = problem.evaluate(row);
            let y: Vec<f64> = domain.outputs.iter().map(|o| outputs[&o.key]).collect();
            observed.push(y.clone());
            let metric = if problem.is_multi_objective() {
                zdt1_hypervolume(&observed.iter().map(|v| [v[0], v[1]]).collect::<Vec<_>>())
            } else {
                observed.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min)
            };
            records.push(Record {
                iteration: records.len() + 1,
                initial,
                x: problem.inputs(row),
                y,
                metric,
            });
            state
                .tell(&ExperimentTable::new(vec![Experiment {
                    inputs: row.clone(),
                    outputs,
                }]))
                .expect("benchmark rows are valid");
            Ok(())
        };

    if n_init > 0 {
        let init = sample(
            &domain,
            n_init,
            &SamplerConfig::LatinHypercube(LatinHypercubeSampler { seed }),
        )
        .map_err(StrategyError::from)?;
        for p in init {
            record(&p.inputs, true, &mut state)?;
        }
    }
    for _ in 0..iters {
        let proposal = state.ask(1)?.remove(0);
        record(&proposal.inputs, false, &mut state)?;
    }
    Ok(BenchRun { problem, records })
}
