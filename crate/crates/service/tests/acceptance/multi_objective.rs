//! ParEGO and EHVI on ZDT1 against a 50-point random baseline.

use kiln_service::bench::{preset, run as bench, Problem};

use crate::{ensure, Outcome};

pub fn run() -> Outcome {
    let problem = Problem::Zdt1 { dim: 6 };
    let mut baseline = Vec::new();
    for seed in 0..10 {
        let r = bench(problem, preset("random", seed).unwrap(), 0, 50, seed)
            .map_err(|e| e.to_string())?;
        baseline.push(r.final_metric());
    }
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for strategy in ["parego", "ehvi"] {
        let mut wins = 0;
        let mut worst_margin = f64::INFINITY;
        let mut mean = 0.0;
        for seed in 0..10 {
            let r = bench(problem, preset(strategy, seed).unwrap(), 20, 30, seed)
                .map_err(|e| e.to_string())?;
            ensure!(r.records.len() == 50, "wrong evaluation budget");
            let hv = r.final_metric();
            wins += usize::from(hv > baseline[seed as usize]);
            worst_margin = worst_margin.min(hv - baseline[seed as usize]);
            mean += hv / 10.0;
        }
        let line = format!("{strategy} beats random in {wins}/10 (mean HV {mean:.2}, worst margin {worst_margin:+.2})");
        if wins < 9 {
            failures.push(line.clone());
        }
        parts.push(line);
    }
    let base_mean = baseline.iter().sum::<f64>() / 10.0;
    let summary = format!("{}; random mean HV {base_mean:.2}", parts.join("; "));
    ensure!(failures.is_empty(), "{summary}");
    Ok(summary)
}
