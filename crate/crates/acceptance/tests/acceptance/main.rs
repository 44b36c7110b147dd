//! Runs every acceptance criterion and prints one line per criterion.
//! Extra arguments filter criteria by substring; cargo's own flags are
//! ignored. Exits non-zero when any criterion fails.

mod calibration;
mod common;
mod equivalence;
mod mann_whitney;
mod metrics;
mod noise;
mod protocol;
mod recovery;
mod sampling;
mod welfare;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// What a criterion reports: pass/fail plus the numbers behind it.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Verdict,
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "welfare_identity", budget: Some(Duration::from_secs(10)), run: welfare::run },
    Criterion { name: "protocol_properties", budget: Some(Duration::from_secs(60)), run: protocol::run },
    Criterion { name: "noise_calibration", budget: None, run: noise::run },
    Criterion { name: "pair_sampling_uniformity", budget: None, run: sampling::run },
    Criterion { name: "metrics_oracle", budget: None, run: metrics::run },
    Criterion { name: "mann_whitney", budget: None, run: mann_whitney::run },
    Criterion { name: "analysis_recovery", budget: Some(Duration::from_secs(120)), run: recovery::run },
    Criterion { name: "directional_calibration", budget: Some(Duration::from_secs(120)), run: calibration::run },
    Criterion { name: "headless_live_equivalence", budget: None, run: equivalence::run },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> =
        CRITERIA.iter().filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()))).collect();
    println!("running {} acceptance criteria", selected.len());
    let mut failed = 0;
    for c in &selected {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                Verdict::new(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        let took = start.elapsed();
        let in_time = c.budget.is_none_or(|b| took <= b);
        let pass = verdict.pass && in_time;
        let budget = c.budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        let late = if in_time { "" } else { " OVER TIME BUDGET;" };
        println!(
            "{} {:<28} {:>7.2}s{budget}  {late}{}",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            took.as_secs_f64(),
            verdict.detail
        );
        failed += !pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", selected.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
