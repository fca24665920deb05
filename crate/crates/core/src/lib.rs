//! Core engine: problem domains, samplers, classical designs, Gaussian-process
//! surrogates and Bayesian-optimization strategies, plus the JSON wire format
//! shared by all of them.

pub(crate) mod union;

pub mod campaign;
pub mod doe;
pub mod domain;
pub mod gp;
pub mod sampling;
pub mod strategy;
pub mod wire;
