//! Closed-form acquisition functions on the larger-is-better scale.

use libm::erfc;

use crate::domain::Objective;

/// Standard deviations at or below this are treated as zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mills ratio `Φ(-x)/φ(x)` for `x ≥ 5`, by backward evaluation of
/// `1/(x + 1/(x + 2/(x + 3/(x + …))))`.
fn mills_ratio(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=120).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// `z Φ(z) + φ(z)` for `z ≤ -5`, as `φ(z) · (1 - x R(x))` with `x = -z`.
fn tail_factor(z: f64) -> (f64, f64) {
    let x = -z;
    let log_pdf = -0.5 * z * z - LN_SQRT_2PI;
    (log_pdf, 1.0 - x * mills_ratio(x))
}

/// Expected improvement of `N(mu, sigma²)` over `best`.
pub fn ei(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= SIGMA_FLOOR {
        return (mu - best).max(0.0);
    }
    let z = (mu - best) / sigma;
    if z > -5.0 {
        sigma * (z * norm_cdf(z) + norm_pdf(z))
    } else {
        let (log_pdf, factor) = tail_factor(z);
        sigma * log_pdf.exp() * factor
    }
}

/// `ln ei(mu, sigma, best)`, finite far into the lower tail. Returns `-inf`
/// when `sigma` is zero and `mu ≤ best`.
pub fn log_ei(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= SIGMA_FLOOR {
        return if mu > best {
            (mu - best).ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    let z = (mu - best) / sigma;
    if z > -5.0 {
        (sigma * (z * norm_cdf(z) + norm_pdf(z))).ln()
    } else {
        let (log_pdf, factor) = tail_factor(z);
        sigma.ln() + log_pdf + factor.ln()
    }
}

pub fn ucb(mu: f64, sigma: f64, beta: f64) -> f64 {
    mu + beta.sqrt() * sigma
}

/// Probability that an output modelled as `N(mu, sigma²)` lands on the
/// desirable side of a sigmoid objective's threshold. Non-sigmoid
/// objectives are always feasible.
pub fn prob_feasible(mu: f64, sigma: f64, objective: &Objective) -> f64 {
    let (threshold, upward) = match objective {
        Objective::MaximizeSigmoid(s) => (s.threshold, true),
        Objective::MinimizeSigmoid(s) => (s.threshold, false),
        _ => return 1.0,
    };
    let margin = if upward {
        mu - threshold
    } else {
        threshold - mu
    };
    if sigma <= SIGMA_FLOOR {
        f64::from(u8::from(margin >= 0.0))
    } else {
        norm_cdf(margin / sigma)
    }
}
