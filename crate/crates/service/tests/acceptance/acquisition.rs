//! Expected improvement, hypervolume and EHVI against independent oracles.

use kiln_core::strategy::{ehvi, ei, hypervolume, log_ei};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::{ensure, Outcome};

fn mean_and_se(n: usize, mut draw: impl FnMut() -> f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let v = draw();
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq - nf * mean * mean).max(0.0) / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn ei_vs_monte_carlo() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut closed_gap: f64 = 0.0;
    for c in 0..20 {
        let z = -3.0 + 6.0 * c as f64 / 19.0;
        let sigma = [0.1, 0.7, 1.0, 2.5, 5.0][c % 5];
        let best = [-1.0, 0.0, 3.0, 10.0][c % 4];
        let mu = best + z * sigma;
        let mut rng = StdRng::seed_from_u64(c as u64);
        let (mc, se) = mean_and_se(10_000_000, || {
            let y = mu
                + sigma * {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                };
            (y - best).max(0.0)
        });
        let exact = ei(mu, sigma, best);
        let zs = (mu - best) / sigma;
        let closed = sigma
            * (zs * 0.5 * libm::erfc(-zs / std::f64::consts::SQRT_2)
                + (-0.5 * zs * zs).exp() / (2.0 * std::f64::consts::PI).sqrt());
        closed_gap = closed_gap.max((exact - closed).abs() / closed);
        let dev = (exact - mc).abs() / se;
        ensure!(
            dev <= 3.0,
            "EI at (μ={mu}, σ={sigma}, f*={best}) is {dev:.2} SE from Monte Carlo"
        );
        worst = worst.max(dev);
    }
    Ok(format!(
        "EI within {worst:.2} SE of 10^7-sample MC at 20 configs (closed form gap {closed_gap:.1e})"
    ))
}

/// `∫_{s0}^∞ Q(s) ds`, the unit-σ EI at `z = -s0`, by composite Simpson.
fn tail_ei(s0: f64) -> f64 {
    let q = |s: f64| 0.5 * libm::erfc(s / std::f64::consts::SQRT_2);
    let span = 40.0 / s0.max(1.0);
    let n = 20_000;
    let h = span / n as f64;
    let mut sum = q(s0) + q(s0 + span);
    for i in 1..n {
        sum += q(s0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn log_ei_consistency() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for i in 0..=800 {
        let z = -30.0 + i as f64 * 0.05;
        for sigma in [0.01, 1.0, 30.0] {
            let (mu, best) = (z * sigma, 0.0);
            let l = log_ei(mu, sigma, best);
            ensure!(l.is_finite(), "log_ei not finite at z = {z}");
            let e = ei(mu, sigma, best);
            ensure!(e > 0.0, "ei underflowed at z = {z}");
            worst = worst.max((l - e.ln()).abs());
        }
    }
    ensure!(worst <= 1e-9, "log_ei and ln(ei) differ by {worst:e}");
    let mut quad: f64 = 0.0;
    for s0 in [1.0, 5.5, 10.0, 20.0, 30.0] {
        let reference = tail_ei(s0).ln();
        quad = quad.max((log_ei(-s0, 1.0, 0.0) - reference).abs());
    }
    ensure!(quad <= 1e-9, "log_ei differs from quadrature by {quad:e}");
    ensure!(
        log_ei(-30.0, 1.0, 0.0).is_finite(),
        "log_ei(z = -30) is not finite"
    );
    Ok(format!(
        "log_ei vs ln ei within {worst:.1e}, vs quadrature within {quad:.1e}, finite at z = -30"
    ))
}

/// Inclusion–exclusion over all subsets.
fn hv_inclusion_exclusion(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let members: Vec<&Vec<f64>> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &points[i])
            .collect();
        let volume: f64 = (0..reference.len())
            .map(|d| members.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min) - reference[d])
            .product();
        total += if members.len() % 2 == 1 {
            volume
        } else {
            -volume
        };
    }
    total
}

fn random_set(rng: &mut StdRng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                // on the positive unit sphere, hence mutually nondominated
                let v: Vec<f64> = (0..m)
                    .map(|_| {
                        ({
                            let z: f64 = StandardNormal.sample(rng);
                            z
                        })
                        .abs()
                            + 1e-3
                    })
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            } else {
                (0..m).map(|_| rng.random_range(0.01..1.0)).collect()
            }
        })
        .collect()
}

fn hypervolume_exact() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let trials = 4000;
    for t in 0..trials {
        let m = 2 + t % 2;
        let n = rng.random_range(1..=8);
        let points = random_set(&mut rng, m, n);
        let reference: Vec<f64> = (0..m).map(|_| -rng.random_range(0.0..0.5)).collect();
        let hv = hypervolume(&points, &reference).map_err(|e| e.to_string())?;
        let oracle = hv_inclusion_exclusion(&points, &reference);
        let err = (hv - oracle).abs() / oracle.max(1.0);
        ensure!(
            err <= 1e-12,
            "hypervolume of {points:?} is {hv}, inclusion–exclusion gives {oracle}"
        );
        worst = worst.max(err);
    }
    Ok(format!(
        "hypervolume matches inclusion–exclusion on {trials} sets (m = 2, 3) within {worst:.1e}"
    ))
}

/// Two-objective hypervolume by a sweep in decreasing first coordinate.
fn hv2(points: &[[f64; 2]], r: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] > r[0] && p[1] > r[1])
        .collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut top = r[1];
    let mut total = 0.0;
    for p in pts {
        if p[1] > top {
            total += (p[0] - r[0]) * (p[1] - top);
            top = p[1];
        }
    }
    total
}

fn ehvi_vs_monte_carlo() -> Result<String, String> {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let reference = [0.0, 0.0];
    for c in 0..50 {
        let n = rng.random_range(0..=6);
        let front: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let angle = rng.random_range(0.05..1.52f64);
                let radius = rng.random_range(0.5..1.0);
                [radius * angle.cos(), radius * angle.sin()]
            })
            .collect();
        let mu = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
        let sigma = [rng.random_range(0.05..0.6), rng.random_range(0.05..0.6)];
        let base = hv2(&front, reference);
        let exact = ehvi(
            &mu,
            &sigma,
            &front.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
            &reference,
            0,
            0,
        )
        .map_err(|e| e.to_string())?;
        let mut with = front.clone();
        with.push([0.0; 2]);
        let (mc, se) = mean_and_se(200_000, || {
            let y = [
                mu[0]
                    + sigma[0] * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    },
                mu[1]
                    + sigma[1] * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    },
            ];
            *with.last_mut().unwrap() = y;
            hv2(&with, reference) - base
        });
        let dev = if se > 0.0 {
            (exact - mc).abs() / se
        } else {
            (exact - mc).abs() * 1e12
        };
        ensure!(
            dev <= 3.0,
            "config {c}: EHVI {exact} vs MC {mc} ± {se} ({dev:.2} SE)"
        );
        worst = worst.max(dev);
    }
    Ok(format!(
        "2-objective EHVI within {worst:.2} SE of MC on 50 configs"
    ))
}

pub fn run() -> Outcome {
    let parts = [
        ei_vs_monte_carlo()?,
        log_ei_consistency()?,
        hypervolume_exact()?,
        ehvi_vs_monte_carlo()?,
    ];
    Ok(parts.join("; "))
}
