//! Augmented Chebyshev scalarization with random simplex weights.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform draw from the probability simplex (Dirichlet(1, …, 1)).
pub fn simplex_weights(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Per-column min/max normalization to `[0, 1]`; constant columns map to 0.5.
pub fn normalize_columns(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    normalize_by(g, g)
}

/// Normalizes `g` with the column ranges of `reference`. Rows outside the
/// reference range land outside `[0, 1]`.
pub fn normalize_by(g: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(m) = reference.first().map(Vec::len) else {
        return g.iter().map(|r| vec![0.5; r.len()]).collect();
    };
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in reference {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    g.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    if hi[j] > lo[j] {
                        (v - lo[j]) / (hi[j] - lo[j])
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect()
}

/// `s_i = min_j w_j g_ij + rho · Σ_j w_j g_ij` on normalized desirabilities.
pub fn parego_scalarize(g: &[Vec<f64>], weights: &[f64], rho: f64) -> Vec<f64> {
    g.iter()
        .map(|row| {
            let weighted = row.iter().zip(weights).map(|(v, w)| v * w);
            let min = weighted.clone().fold(f64::INFINITY, f64::min);
            min + rho * weighted.sum::<f64>()
        })
        .collect()
}
