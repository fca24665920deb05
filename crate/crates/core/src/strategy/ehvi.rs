//! Expected hypervolume improvement for independent normal predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::acquisition::ei;
use super::pareto::{exclusive, pareto_front};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EhviError {
    #[error("EHVI supports 2 to 4 objectives, got {0}")]
    Objectives(usize),
    #[error("front point {0} does not strictly dominate the reference point")]
    Reference(usize),
    #[error("mean, std and reference point lengths differ")]
    Dimension,
}

fn check(
    mu: &[f64],
    sigma: &[f64],
    front: &[Vec<f64>],
    reference: &[f64],
) -> Result<(), EhviError> {
    let m = reference.len();
    if mu.len() != m || sigma.len() != m || front.iter().any(|p| p.len() != m) {
        return Err(EhviError::Dimension);
    }
    if !(2..=4).contains(&m) {
        return Err(EhviError::Objectives(m));
    }
    if let Some(i) = front
        .iter()
        .position(|p| !p.iter().zip(reference).all(|(x, r)| x > r))
    {
        return Err(EhviError::Reference(i));
    }
    Ok(())
}

/// Exact two-objective EHVI.
///
/// With the front sorted by the first objective, `a_1 < … < a_k` and
/// `b_1 > … > b_k`, and `a_0 = r_1`, `a_{k+1} = ∞`, `b_{k+1} = r_2`:
/// `Σ_i [ei(μ₁,σ₁,a_{i-1}) − ei(μ₁,σ₁,a_i)] · ei(μ₂,σ₂,b_i)`.
fn ehvi_2d(mu: &[f64], sigma: &[f64], front: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<&Vec<f64>> = pareto_front(front).into_iter().map(|i| &front[i]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(b[1].total_cmp(&a[1])));
    let mut total = 0.0;
    let mut a_prev = reference[0];
    for p in pts
        .iter()
        .chain(std::iter::once(&&vec![f64::INFINITY, reference[1]]))
    {
        let (a, b) = (p[0], p[1]);
        let upper = if a.is_infinite() {
            0.0
        } else {
            ei(mu[0], sigma[0], a)
        };
        let width = ei(mu[0], sigma[0], a_prev) - upper;
        if width > 0.0 {
            total += width * ei(mu[1], sigma[1], b);
        }
        a_prev = a_prev.max(a.min(f64::MAX));
    }
    total.max(0.0)
}

/// Improvement of one sample over the front.
fn improvement(y: &[f64], front: &[Vec<f64>], reference: &[f64]) -> f64 {
    if !y.iter().zip(reference).all(|(a, r)| a > r) {
        return 0.0;
    }
    exclusive(y, front, reference).max(0.0)
}

/// Monte-Carlo EHVI with `samples` antithetic draws; returns the estimate
/// and its standard error (computed over antithetic pair means).
pub fn ehvi_mc(
    mu: &[f64],
    sigma: &[f64],
    front: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), EhviError> {
    check(mu, sigma, front, reference)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (samples / 2).max(1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut y_plus = vec![0.0; mu.len()];
    let mut y_minus = vec![0.0; mu.len()];
    for _ in 0..pairs {
        for d in 0..mu.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            y_plus[d] = mu[d] + sigma[d] * z;
            y_minus[d] = mu[d] - sigma[d] * z;
        }
        let v = 0.5
            * (improvement(&y_plus, front, reference) + improvement(&y_minus, front, reference));
        sum += v;
        sum_sq += v * v;
    }
    let n = pairs as f64;
    let mean = sum / n;
    let var = if pairs > 1 {
        (sum_sq - n * mean * mean).max(0.0) / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// EHVI: exact for two objectives, Monte-Carlo for three or four.
pub fn ehvi(
    mu: &[f64],
    sigma: &[f64],
    front: &[Vec<f64>],
    reference: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<f64, EhviError> {
    check(mu, sigma, front, reference)?;
    if reference.len() == 2 {
        Ok(ehvi_2d(mu, sigma, front, reference))
    } else {
        Ok(ehvi_mc(mu, sigma, front, reference, mc_samples, seed)?.0)
    }
}
