//! Proposal strategies: random and designed batches, single-objective BO,
//! ParEGO and EHVI multi-objective BO, and stepwise composition.
//!
//! Every acquisition is maximized on the desirability scale. Batches are
//! built greedily: after each pick the surrogates are conditioned on their
//! own posterior mean at the picked row.

mod acquisition;
mod config;
mod ehvi;
mod optimize;
mod parego;
mod pareto;
mod state;

pub use acquisition::{ei, log_ei, norm_cdf, norm_pdf, prob_feasible, ucb, SIGMA_FLOOR};
pub use config::{
    select_step, AcquisitionConfig, AlwaysCondition, DoEStrategy, ExpectedImprovement,
    LogExpectedImprovement, MoboEhvi, MoboParEgo, NumberOfExperimentsCondition, RandomStrategy,
    SoboStrategy, Step, StepCondition, StepwiseStrategy, StrategyConfig, UpperConfidenceBound,
};
pub use ehvi::{ehvi, ehvi_mc, EhviError};
pub use optimize::{optimize_acquisition, AcqOptConfig};
pub use parego::{normalize_by, normalize_columns, parego_scalarize, simplex_weights};
pub use pareto::{dominates, hypervolume, pareto_front, HypervolumeError};
pub use state::{default_reference, StrategyError, StrategyState, MIN_MEASURED};
