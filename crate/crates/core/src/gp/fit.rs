use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{
    log_marginal_likelihood, nelder_mead, GpError, GpHyperparameters, InputEncoding, Kernel,
    OutputTransform, TrainedGp,
};
use crate::domain::{Domain, ExperimentTable, Row};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_BOUNDS: (f64, f64) = (1e-3, 1e3);
/// In standardized-output units.
pub const NOISE_BOUNDS: (f64, f64) = (1e-8, 1.0);

// random restarts start in a narrower region than the bounds
const LENGTHSCALE_INIT: (f64, f64) = (1e-2, 1e1);
const SIGNAL_INIT: (f64, f64) = (1e-1, 1e1);
const NOISE_INIT: (f64, f64) = (1e-6, 1e-1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub seed: u64,
    /// Random restarts in addition to the heuristic start.
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
}

fn default_restarts() -> usize {
    10
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_restarts: default_restarts(),
        }
    }
}

/// Fits a GP to the measured values of `output_key`.
pub fn fit(
    domain: &Domain,
    experiments: &ExperimentTable,
    output_key: &str,
    kernel: &Kernel,
    config: &FitConfig,
) -> Result<TrainedGp, GpError> {
    let (rows, y): (Vec<Row>, Vec<f64>) = experiments
        .rows
        .iter()
        .filter_map(|e| e.outputs.get(output_key).map(|&y| (e.inputs.clone(), y)))
        .unzip();
    fit_targets(domain, &rows, &y, output_key, kernel, config)
}

fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(
                x[i].iter()
                    .zip(&x[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            );
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo.ln()..hi.ln())
}

/// Fits a GP to arbitrary targets at domain rows.
pub fn fit_targets(
    domain: &Domain,
    rows: &[Row],
    y: &[f64],
    target: &str,
    kernel: &Kernel,
    config: &FitConfig,
) -> Result<TrainedGp, GpError> {
    if rows.len() < 2 {
        return Err(GpError::TooFewRows {
            output: target.to_owned(),
            measured: rows.len(),
        });
    }
    if rows.len() != y.len() {
        return Err(GpError::Length(y.len(), rows.len()));
    }
    let encoding = InputEncoding::from_domain(domain);
    let x = encoding.encode(rows);
    let transform = OutputTransform::fit(y);
    let ys: Vec<f64> = y.iter().map(|&v| transform.apply(v)).collect();

    let n_ls = if kernel.ard() { encoding.width() } else { 1 };
    let mut lower = vec![LENGTHSCALE_BOUNDS.0.ln(); n_ls];
    let mut upper = vec![LENGTHSCALE_BOUNDS.1.ln(); n_ls];
    lower.extend([SIGNAL_BOUNDS.0.ln(), NOISE_BOUNDS.0.ln()]);
    upper.extend([SIGNAL_BOUNDS.1.ln(), NOISE_BOUNDS.1.ln()]);

    let mut inits = Vec::with_capacity(config.n_restarts + 1);
    let ls0 = median_pairwise_distance(&x)
        .clamp(LENGTHSCALE_BOUNDS.0, LENGTHSCALE_BOUNDS.1)
        .ln();
    let mut heuristic = vec![ls0; n_ls];
    heuristic.extend([0.0, 1e-4f64.ln()]);
    inits.push(heuristic);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.n_restarts {
        let mut theta: Vec<f64> = (0..n_ls)
            .map(|_| log_uniform(&mut rng, LENGTHSCALE_INIT))
            .collect();
        theta.push(log_uniform(&mut rng, SIGNAL_INIT));
        theta.push(log_uniform(&mut rng, NOISE_INIT));
        inits.push(theta);
    }

    let n_params = n_ls + 2;
    let max_evals = 120 * (n_params + 1);
    let objective = |theta: &[f64]| match log_marginal_likelihood(
        kernel,
        &GpHyperparameters::from_log(theta),
        &x,
        &ys,
    ) {
        Ok(l) => -l,
        Err(_) => f64::INFINITY,
    };
    let results: Vec<_> = inits
        .par_iter()
        .map(|init| nelder_mead(objective, init, &lower, &upper, 1.0, max_evals, 1e-9))
        .collect();
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.is_finite())
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .ok_or(GpError::AllRestartsFailed)?
        .1;
    Ok(TrainedGp::new(
        target,
        kernel.clone(),
        GpHyperparameters::from_log(&best.x),
        encoding,
        transform,
        x,
        y.to_vec(),
    ))
}
