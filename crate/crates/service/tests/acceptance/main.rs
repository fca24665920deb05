//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails or runs over its time limit.

#[path = "../common/mod.rs"]
mod common;

mod acquisition;
mod blanket;
mod checks;
mod doe;
mod gp;
mod multi_objective;
mod round_trip;
mod service_loop;
mod single_objective;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// `Ok(summary)` or `Err(reason)`.
pub type Outcome = Result<String, String>;

/// Returns early with a formatted failure.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            name: "serialization round-trip",
            limit: secs(30),
            run: round_trip::run,
        },
        Criterion {
            name: "constraint blanket",
            limit: None,
            run: blanket::run,
        },
        Criterion {
            name: "GP correctness",
            limit: secs(60),
            run: gp::run,
        },
        Criterion {
            name: "acquisition math",
            limit: secs(300),
            run: acquisition::run,
        },
        Criterion {
            name: "single-objective BO (Branin)",
            limit: secs(120),
            run: single_objective::run,
        },
        Criterion {
            name: "multi-objective BO (ZDT1)",
            limit: secs(300),
            run: multi_objective::run,
        },
        Criterion {
            name: "D-optimal exchange",
            limit: secs(120),
            run: doe::run,
        },
        Criterion {
            name: "service loop",
            limit: secs(60),
            run: service_loop::run,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();

    let mut failed = 0;
    let mut ran = 0;
    for (i, c) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| Err(panic_message(p)));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(s), Some(limit)) if elapsed > limit => {
                Err(format!("{s}; over the {} s limit", limit.as_secs()))
            }
            (o, _) => o,
        };
        let limit = c
            .limit
            .map_or(String::new(), |l| format!(", limit {} s", l.as_secs()));
        let (status, detail) = match &outcome {
            Ok(s) => ("PASS", s),
            Err(s) => {
                failed += 1;
                ("FAIL", s)
            }
        };
        println!(
            "{status} [{}/{}] {}: {detail} ({:.1} s{limit})",
            i + 1,
            criteria.len(),
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
