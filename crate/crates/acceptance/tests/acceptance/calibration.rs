use std::path::Path;

use repnet_core::analysis::{mann_whitney_exact, MAIN_ROUNDS, PAPER_TABLE1};
use repnet_core::log::{EventLog, Record};
use repnet_core::sim::{run_batch, BatchSpec};

use crate::Verdict;

/// Mean cooperation rate over the main rounds of one session.
fn cooperation(log: &EventLog) -> f64 {
    let rates: Vec<f64> = log
        .records
        .iter()
        .filter_map(|r| match r {
            Record::RoundSummary { round, cooperation_rate, .. } if MAIN_ROUNDS.contains(round) => Some(*cooperation_rate),
            _ => None,
        })
        .collect();
    rates.iter().sum::<f64>() / rates.len() as f64
}

/// Runs the shipped 2x2 grid and asks whether uncertainty lowers cooperation
/// at both rewiring speeds, one session per observation.
pub fn run() -> Verdict {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/grid.toml");
    let mut spec = BatchSpec::load(&path).expect("grid config loads");
    spec.output_path = None;
    let logs = run_batch(&spec, None).expect("grid runs");
    let cell = |name: &str| -> Vec<f64> { logs.iter().filter(|l| l.header.treatment == name).map(cooperation).collect() };
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let reference = |name: &str| PAPER_TABLE1.iter().find(|r| r.cell == name).map_or(f64::NAN, |r| r.cooperation_rate);

    let mut pass = true;
    let mut parts = Vec::new();
    for speed in ["slow", "fast"] {
        let (certain, noisy) = (cell(&format!("{speed}-nounc")), cell(&format!("{speed}-unc")));
        let p = mann_whitney_exact(&certain, &noisy).p_two_sided;
        let (a, b) = (mean(&certain), mean(&noisy));
        pass &= a > b && p < 0.05;
        parts.push(format!(
            "{speed}: nounc {a:.3} (ref {:.3}) vs unc {b:.3} (ref {:.3}), n={}+{}, p={p:.4}",
            reference(&format!("{speed}-nounc")),
            reference(&format!("{speed}-unc")),
            certain.len(),
            noisy.len()
        ));
    }
    Verdict::new(pass, parts.join("; "))
}
