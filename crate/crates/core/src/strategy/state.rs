use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::acquisition::{ei, log_ei, prob_feasible, ucb};
use super::config::{AcquisitionConfig, MoboEhvi, MoboParEgo, SoboStrategy, StrategyConfig};
use super::ehvi::{ehvi, EhviError};
use super::optimize::{optimize_acquisition, AcqOptConfig};
use super::parego::{normalize_by, parego_scalarize, simplex_weights};
use super::pareto::pareto_front;
use crate::doe::{design_rows, DesignError};
use crate::domain::{
    evaluate_objective, ContinuousOutput, Domain, ExperimentTable, Objective, Prediction, Proposal,
    Row, ValidationError, DEFAULT_TOL,
};
use crate::gp::{fit_targets, FitConfig, GpError, InputEncoding, Kernel, TrainedGp};
use crate::sampling::{derive_seed, sample, SampleError};

/// Measured rows each modelled output needs before a predictive ask.
pub const MIN_MEASURED: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error(
        "`{output}` has {measured} measured rows; predictive strategies need at least {required}"
    )]
    InsufficientData {
        output: String,
        measured: usize,
        required: usize,
    },
    #[error("no step is active at {0} experiments")]
    NoActiveStep(usize),
    #[error("invalid strategy configuration")]
    Invalid(Vec<ValidationError>),
    #[error("proposed batch violates a constraint")]
    Infeasible,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Ehvi(#[from] EhviError),
}

/// Everything a strategy needs between asks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StrategyState {
    pub config: StrategyConfig,
    pub domain: Domain,
    #[serde(default)]
    pub experiments: ExperimentTable,
    /// Fitted surrogates keyed by target, valid for `experiments`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub surrogates: BTreeMap<String, TrainedGp>,
    #[serde(default)]
    pub ask_count: u64,
    /// Rows told so far.
    #[serde(default)]
    pub tell_count: u64,
}

/// Desirability posterior as an affine image of a GP.
#[derive(Clone)]
struct Model {
    gp: TrainedGp,
    scale: f64,
}

impl Model {
    fn raw(&self, x: &[f64]) -> Option<(f64, f64)> {
        let p = self.gp.predict_encoded(&[x.to_vec()], true).ok()?;
        Some((p[0].mean, p[0].std))
    }

    fn at(&self, x: &[f64]) -> (f64, f64) {
        self.raw(x).map_or((f64::NAN, f64::NAN), |(m, s)| {
            (self.scale * m, self.scale.abs() * s)
        })
    }

    /// Conditions on the posterior mean at `x`.
    fn fantasize(&mut self, x: &[f64]) {
        if let Some((m, _)) = self.raw(x) {
            self.gp = self.gp.condition_on(&[x.to_vec()], &[m]);
        }
    }
}

struct Feasibility {
    model: Model,
    objective: Objective,
}

fn log_feasibility(feas: &[Feasibility], x: &[f64]) -> f64 {
    feas.iter()
        .map(|f| {
            let (m, s) = f.model.at(x);
            prob_feasible(m, s, &f.objective).ln()
        })
        .sum()
}

/// Shared knobs of the predictive strategies.
struct Predictive<'a> {
    kernel: &'a Kernel,
    optimizer: &'a AcqOptConfig,
    seed: u64,
    fit_restarts: usize,
}

impl<'a> Predictive<'a> {
    fn of(config: &'a StrategyConfig) -> Option<Self> {
        let (kernel, optimizer, seed, fit_restarts) = match config {
            StrategyConfig::Sobo(SoboStrategy {
                surrogate,
                optimizer,
                seed,
                fit_restarts,
                ..
            })
            | StrategyConfig::ParEgo(MoboParEgo {
                surrogate,
                optimizer,
                seed,
                fit_restarts,
                ..
            })
            | StrategyConfig::Ehvi(MoboEhvi {
                surrogate,
                optimizer,
                seed,
                fit_restarts,
                ..
            }) => (surrogate, optimizer, *seed, *fit_restarts),
            _ => return None,
        };
        Some(Self {
            kernel,
            optimizer,
            seed,
            fit_restarts,
        })
    }
}

fn prefixed(
    prefix: &str,
    errors: Vec<ValidationError>,
) -> impl Iterator<Item = ValidationError> + '_ {
    errors.into_iter().map(move |mut e| {
        e.path = if e.path.is_empty() {
            prefix.to_owned()
        } else {
            format!("{prefix}.{}", e.path)
        };
        e
    })
}

impl StrategyState {
    pub fn new(config: StrategyConfig, domain: Domain) -> Result<Self, Vec<ValidationError>> {
        let state = Self {
            config,
            domain,
            experiments: ExperimentTable::default(),
            surrogates: BTreeMap::new(),
            ask_count: 0,
            tell_count: 0,
        };
        state.validate()?;
        Ok(state)
    }

    /// Checks domain, config, experiments and surrogates. Paths are dotted,
    /// relative to the state.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        if let Err(e) = self.domain.validate() {
            return Err(prefixed("domain", e).collect());
        }
        let mut errors: Vec<ValidationError> =
            prefixed("config", self.config.validate(&self.domain)).collect();
        if let Err(e) = self.experiments.validate(&self.domain) {
            errors.extend(prefixed("experiments", e));
        }
        for (key, gp) in &self.surrogates {
            let path = format!("surrogates.{key}");
            if gp.target != *key {
                errors.push(ValidationError::new(
                    format!("{path}.target"),
                    "target must match its key",
                ));
            }
            if let Err(e) = gp.validate() {
                errors.extend(prefixed(&path, e));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Appends validated rows and invalidates surrogates. Returns warnings
    /// (out-of-bounds historical values).
    pub fn tell(
        &mut self,
        table: &ExperimentTable,
    ) -> Result<Vec<ValidationError>, Vec<ValidationError>> {
        let warnings = table.validate(&self.domain)?;
        self.experiments.extend(table);
        self.surrogates.clear();
        self.tell_count += table.len() as u64;
        Ok(warnings)
    }

    /// The leaf strategy that the next ask runs.
    pub fn active_config(&self) -> Option<&StrategyConfig> {
        self.config.active(self.experiments.len())
    }

    /// Proposes `n` experiments.
    pub fn ask(&mut self, n: usize) -> Result<Vec<Proposal>, StrategyError> {
        if n == 0 {
            return Err(StrategyError::BatchSize);
        }
        let errors = self.config.validate(&self.domain);
        if !errors.is_empty() {
            return Err(StrategyError::Invalid(errors));
        }
        let n_exp = self.experiments.len();
        let leaf = self
            .config
            .active(n_exp)
            .ok_or(StrategyError::NoActiveStep(n_exp))?
            .clone();
        let proposals = match &leaf {
            StrategyConfig::Random(r) => {
                let sampler = r
                    .sampler
                    .with_seed(derive_seed(&[r.sampler.seed(), self.ask_count]));
                sample(&self.domain, n, &sampler)?
            }
            StrategyConfig::DoE(d) => {
                design_rows(&self.domain, &d.design, n, n_exp, self.ask_count)?
                    .into_iter()
                    .map(Proposal::new)
                    .collect()
            }
            StrategyConfig::Sobo(s) => self.ask_sobo(&leaf, s, n)?,
            StrategyConfig::ParEgo(p) => self.ask_parego(&leaf, p, n)?,
            StrategyConfig::Ehvi(e) => self.ask_ehvi(&leaf, e, n)?,
            StrategyConfig::Stepwise(_) => unreachable!("active() resolves stepwise configs"),
        };
        let rows: Vec<Row> = proposals.iter().map(|p| p.inputs.clone()).collect();
        if !self.domain.batch_feasible(&rows, DEFAULT_TOL) {
            return Err(StrategyError::Infeasible);
        }
        self.ask_count += 1;
        Ok(proposals)
    }

    fn measured(&self, key: &str) -> (Vec<Row>, Vec<f64>) {
        self.experiments
            .rows
            .iter()
            .filter_map(|e| e.outputs.get(key).map(|&y| (e.inputs.clone(), y)))
            .unzip()
    }

    fn require(&self, output: &str, measured: usize) -> Result<(), StrategyError> {
        if measured < MIN_MEASURED {
            return Err(StrategyError::InsufficientData {
                output: output.to_owned(),
                measured,
                required: MIN_MEASURED,
            });
        }
        Ok(())
    }

    /// Fits (or reuses) the GP for `target`. `tag` separates fit seeds of
    /// different targets.
    fn surrogate(
        &mut self,
        p: &Predictive,
        target: &str,
        tag: u64,
        rows: &[Row],
        y: &[f64],
    ) -> Result<TrainedGp, StrategyError> {
        if let Some(gp) = self.surrogates.get(target) {
            if gp.kernel == *p.kernel && gp.train_y == y {
                return Ok(gp.clone());
            }
        }
        let gp = self.fit_uncached(p, target, &[tag], rows, y)?;
        self.surrogates.insert(target.to_owned(), gp.clone());
        Ok(gp)
    }

    fn fit_uncached(
        &self,
        p: &Predictive,
        target: &str,
        tag: &[u64],
        rows: &[Row],
        y: &[f64],
    ) -> Result<TrainedGp, StrategyError> {
        let mut parts = vec![p.seed];
        parts.extend_from_slice(tag);
        parts.push(self.experiments.len() as u64);
        let cfg = FitConfig {
            seed: derive_seed(&parts),
            n_restarts: p.fit_restarts,
        };
        Ok(fit_targets(&self.domain, rows, y, target, p.kernel, &cfg)?)
    }

    fn output_index(&self, key: &str) -> u64 {
        self.domain
            .outputs
            .iter()
            .position(|o| o.key == key)
            .unwrap_or(0) as u64
    }

    fn raw_gp(&mut self, p: &Predictive, key: &str) -> Result<TrainedGp, StrategyError> {
        let (rows, y) = self.measured(key);
        self.require(key, rows.len())?;
        let tag = self.output_index(key);
        self.surrogate(p, key, tag, &rows, &y)
    }

    /// Desirability model for an objective output.
    fn desirability_model(
        &mut self,
        p: &Predictive,
        output: &ContinuousOutput,
    ) -> Result<Model, StrategyError> {
        match &output.objective {
            Objective::Maximize(o) => Ok(Model {
                gp: self.raw_gp(p, &output.key)?,
                scale: o.weight,
            }),
            Objective::Minimize(o) => Ok(Model {
                gp: self.raw_gp(p, &output.key)?,
                scale: -o.weight,
            }),
            objective => {
                let (rows, y) = self.measured(&output.key);
                self.require(&output.key, rows.len())?;
                let g: Vec<f64> = y
                    .iter()
                    .map(|&v| evaluate_objective(objective, v))
                    .collect();
                let tag = 1000 + self.output_index(&output.key);
                let gp =
                    self.surrogate(p, &format!("{}#desirability", output.key), tag, &rows, &g)?;
                Ok(Model { gp, scale: 1.0 })
            }
        }
    }

    fn feasibility(&mut self, p: &Predictive) -> Result<Vec<Feasibility>, StrategyError> {
        let sigmoid: Vec<ContinuousOutput> = self.domain.sigmoid_outputs().cloned().collect();
        sigmoid
            .into_iter()
            .map(|o| {
                Ok(Feasibility {
                    model: Model {
                        gp: self.raw_gp(p, &o.key)?,
                        scale: 1.0,
                    },
                    objective: o.objective,
                })
            })
            .collect()
    }

    /// Objective outputs plus rows where all are measured, as inputs and a
    /// desirability matrix.
    fn observed_desirabilities(&self) -> (Vec<Row>, Vec<Vec<f64>>) {
        let objectives: Vec<&ContinuousOutput> = self.domain.objective_outputs().collect();
        self.experiments
            .rows
            .iter()
            .filter_map(|e| {
                let g: Option<Vec<f64>> = objectives
                    .iter()
                    .map(|o| {
                        e.outputs
                            .get(&o.key)
                            .map(|&y| evaluate_objective(&o.objective, y))
                    })
                    .collect();
                g.map(|g| (e.inputs.clone(), g))
            })
            .unzip()
    }

    fn require_joint(&self, n_rows: usize) -> Result<(), StrategyError> {
        let keys: Vec<&str> = self
            .domain
            .objective_outputs()
            .map(|o| o.key.as_str())
            .collect();
        self.require(&keys.join("+"), n_rows)
    }

    /// Per-output predictions from the unconditioned raw GPs.
    fn attach_predictions(
        &mut self,
        p: &Predictive,
        rows: Vec<Row>,
    ) -> Result<Vec<Proposal>, StrategyError> {
        let outputs = self.domain.outputs.clone();
        let mut gps = Vec::new();
        for o in &outputs {
            if self.experiments.measured(&o.key) >= MIN_MEASURED {
                gps.push((o, self.raw_gp(p, &o.key)?));
            }
        }
        rows.into_iter()
            .map(|row| {
                let mut proposal = Proposal::new(row);
                for (o, gp) in &gps {
                    let post = gp.predict(std::slice::from_ref(&proposal.inputs))?[0];
                    proposal.predictions.insert(
                        o.key.clone(),
                        Prediction {
                            mean: post.mean,
                            std: post.std,
                            desirability: evaluate_objective(&o.objective, post.mean),
                        },
                    );
                }
                Ok(proposal)
            })
            .collect()
    }

    fn pick_seed(&self, p: &Predictive, k: usize) -> u64 {
        derive_seed(&[p.seed, p.optimizer.seed, self.ask_count, k as u64])
    }

    /// After the first pick, interpoint features are frozen at its values.
    fn pin_interpoint(&self, fixed: &mut Row, first: &Row) {
        for key in self.domain.interpoint_features() {
            if let Some(v) = first.get(key) {
                fixed.insert(key.to_owned(), v.clone());
            }
        }
    }

    fn ask_sobo(
        &mut self,
        leaf: &StrategyConfig,
        s: &SoboStrategy,
        n: usize,
    ) -> Result<Vec<Proposal>, StrategyError> {
        let p = Predictive::of(leaf).expect("predictive config");
        let objectives: Vec<ContinuousOutput> = self.domain.objective_outputs().cloned().collect();
        let (mut model, mut best) = if let [only] = objectives.as_slice() {
            let model = self.desirability_model(&p, only)?;
            let best = self
                .measured(&only.key)
                .1
                .iter()
                .map(|&y| evaluate_objective(&only.objective, y))
                .fold(f64::NEG_INFINITY, f64::max);
            (model, best)
        } else {
            // objective weights are already inside each desirability
            let (rows, g) = self.observed_desirabilities();
            self.require_joint(rows.len())?;
            let y: Vec<f64> = g.iter().map(|r| r.iter().sum()).collect();
            let tag = 2000;
            let gp = self.surrogate(&p, "#scalarized", tag, &rows, &y)?;
            let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Model { gp, scale: 1.0 }, best)
        };
        let mut feas = self.feasibility(&p)?;
        let encoding = InputEncoding::from_domain(&self.domain);
        let mut fixed = Row::new();
        let mut rows: Vec<Row> = Vec::with_capacity(n);
        for k in 0..n {
            let acq = |row: &Row| {
                let x = encoding.encode_row(row);
                let (mu, sd) = model.at(&x);
                let log_pf = log_feasibility(&feas, &x);
                let v = match &s.acquisition {
                    AcquisitionConfig::Ei(_) => ei(mu, sd, best) * log_pf.exp(),
                    AcquisitionConfig::LogEi(_) => log_ei(mu, sd, best) + log_pf,
                    AcquisitionConfig::Ucb(u) => ucb(mu, sd, u.beta) * log_pf.exp(),
                };
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            };
            let (row, _) = optimize_acquisition(
                &acq,
                &self.domain,
                p.optimizer,
                &fixed,
                self.pick_seed(&p, k),
            )?;
            if k == 0 {
                self.pin_interpoint(&mut fixed, &row);
            }
            if k + 1 < n {
                let x = encoding.encode_row(&row);
                best = best.max(model.at(&x).0);
                model.fantasize(&x);
                for f in &mut feas {
                    f.model.fantasize(&x);
                }
            }
            rows.push(row);
        }
        self.attach_predictions(&p, rows)
    }

    fn ask_parego(
        &mut self,
        leaf: &StrategyConfig,
        cfg: &MoboParEgo,
        n: usize,
    ) -> Result<Vec<Proposal>, StrategyError> {
        let p = Predictive::of(leaf).expect("predictive config");
        let objectives: Vec<ContinuousOutput> = self.domain.objective_outputs().cloned().collect();
        let (obs_rows, obs_g) = self.observed_desirabilities();
        self.require_joint(obs_rows.len())?;
        let mut models = objectives
            .iter()
            .map(|o| self.desirability_model(&p, o))
            .collect::<Result<Vec<_>, _>>()?;
        let mut feas = self.feasibility(&p)?;
        let encoding = InputEncoding::from_domain(&self.domain);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[p.seed, self.ask_count, 1]));

        let mut rows: Vec<Row> = Vec::with_capacity(n);
        let mut all_rows = obs_rows.clone();
        let mut all_g = obs_g.clone();
        let mut fixed = Row::new();
        for k in 0..n {
            let w = simplex_weights(objectives.len(), &mut rng);
            let s = parego_scalarize(&normalize_by(&all_g, &obs_g), &w, cfg.rho);
            let gp = self.fit_uncached(
                &p,
                "#parego",
                &[3000, self.ask_count, k as u64],
                &all_rows,
                &s,
            )?;
            let model = Model { gp, scale: 1.0 };
            let best = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let acq = |row: &Row| {
                let x = encoding.encode_row(row);
                let (mu, sd) = model.at(&x);
                let v = log_ei(mu, sd, best) + log_feasibility(&feas, &x);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            };
            let (row, _) = optimize_acquisition(
                &acq,
                &self.domain,
                p.optimizer,
                &fixed,
                self.pick_seed(&p, k),
            )?;
            if k == 0 {
                self.pin_interpoint(&mut fixed, &row);
            }
            if k + 1 < n {
                let x = encoding.encode_row(&row);
                all_g.push(models.iter().map(|m| m.at(&x).0).collect());
                all_rows.push(row.clone());
                for m in &mut models {
                    m.fantasize(&x);
                }
                for f in &mut feas {
                    f.model.fantasize(&x);
                }
            }
            rows.push(row);
        }
        self.attach_predictions(&p, rows)
    }

    fn ask_ehvi(
        &mut self,
        leaf: &StrategyConfig,
        cfg: &MoboEhvi,
        n: usize,
    ) -> Result<Vec<Proposal>, StrategyError> {
        let p = Predictive::of(leaf).expect("predictive config");
        let objectives: Vec<ContinuousOutput> = self.domain.objective_outputs().cloned().collect();
        let (obs_rows, obs_g) = self.observed_desirabilities();
        self.require_joint(obs_rows.len())?;
        let mut models = objectives
            .iter()
            .map(|o| self.desirability_model(&p, o))
            .collect::<Result<Vec<_>, _>>()?;
        let mut feas = self.feasibility(&p)?;
        let encoding = InputEncoding::from_domain(&self.domain);
        let reference = match &cfg.ref_point {
            Some(r) => r.clone(),
            None => default_reference(&obs_g),
        };

        let mut g = obs_g;
        let mut fixed = Row::new();
        let mut rows: Vec<Row> = Vec::with_capacity(n);
        for k in 0..n {
            let dominating: Vec<Vec<f64>> = g
                .iter()
                .filter(|q| q.iter().zip(&reference).all(|(a, r)| a > r))
                .cloned()
                .collect();
            let front: Vec<Vec<f64>> = pareto_front(&dominating)
                .into_iter()
                .map(|i| dominating[i].clone())
                .collect();
            let mc_seed = derive_seed(&[p.seed, self.ask_count, k as u64, 2]);
            let acq = |row: &Row| {
                let x = encoding.encode_row(row);
                let (mu, sd): (Vec<f64>, Vec<f64>) = models.iter().map(|m| m.at(&x)).unzip();
                let v = ehvi(&mu, &sd, &front, &reference, cfg.mc_samples, mc_seed).unwrap_or(0.0)
                    * log_feasibility(&feas, &x).exp();
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            };
            let (row, _) = optimize_acquisition(
                &acq,
                &self.domain,
                p.optimizer,
                &fixed,
                self.pick_seed(&p, k),
            )?;
            if k == 0 {
                self.pin_interpoint(&mut fixed, &row);
            }
            if k + 1 < n {
                let x = encoding.encode_row(&row);
                g.push(models.iter().map(|m| m.at(&x).0).collect());
                for m in &mut models {
                    m.fantasize(&x);
                }
                for f in &mut feas {
                    f.model.fantasize(&x);
                }
            }
            rows.push(row);
        }
        self.attach_predictions(&p, rows)
    }
}

/// Componentwise minimum minus 10% of the observed range; a zero range
/// steps back by 10% of the magnitude (at least 0.1).
pub fn default_reference(g: &[Vec<f64>]) -> Vec<f64> {
    let m = g.first().map_or(0, Vec::len);
    (0..m)
        .map(|j| {
            let lo = g.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            let hi = g.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            if range > 0.0 {
                lo - 0.1 * range
            } else {
                lo - 0.1 * lo.abs().max(1.0)
            }
        })
        .collect()
}
