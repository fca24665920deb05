//! SOBO-LogEI on Branin against uniform random search.

use kiln_service::bench::{preset, run as bench, Problem, BRANIN_OPTIMUM};

use crate::{ensure, Outcome};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run() -> Outcome {
    let mut bo = Vec::new();
    let mut random = Vec::new();
    for seed in 0..10 {
        let sobo = bench(
            Problem::Branin,
            preset("sobo-logei", seed).unwrap(),
            10,
            30,
            seed,
        )
        .map_err(|e| e.to_string())?;
        let base = bench(
            Problem::Branin,
            preset("random", seed).unwrap(),
            0,
            40,
            seed,
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            sobo.records.len() == 40 && base.records.len() == 40,
            "wrong evaluation budget"
        );
        bo.push(sobo.final_metric() - BRANIN_OPTIMUM);
        random.push(base.final_metric() - BRANIN_OPTIMUM);
    }
    let near = bo.iter().filter(|r| *r + BRANIN_OPTIMUM <= 0.5).count();
    let wins = bo.iter().zip(&random).filter(|(b, r)| b < r).count();
    let worst = bo.iter().copied().fold(0.0, f64::max) + BRANIN_OPTIMUM;
    let summary = format!(
        "best ≤ 0.5 in {near}/10 seeds (worst {worst:.4}); beats random in {wins}/10 paired seeds; median regret {:.2e} vs random {:.2e}",
        median(bo.clone()),
        median(random.clone())
    );
    ensure!(near >= 8 && wins >= 9, "{summary}");
    Ok(summary)
}
