use std::path::Path;

use repnet_core::game::Action;
use repnet_core::sim::{run_batch, BatchSpec};

use crate::common::rounds;
use crate::Verdict;

const SPEC: &str = r#"
replications = 8
root_seed = 31
roster = ["AlwaysC*2", "AlwaysD*2", "GrimNet*2", "TitForTatMajority*2", "EmpiricalNoUnc:C*2", "EmpiricalUnc:D*2"]

[[treatment]]
name = "slow-nounc"
speed = "slow"
uncertainty = false

[[treatment]]
name = "slow-unc"
speed = "slow"
uncertainty = true

[[treatment]]
name = "fast-nounc"
speed = "fast"
uncertainty = false

[[treatment]]
name = "fast-unc"
speed = "fast"
uncertainty = true
"#;

/// Under the 3/-5/5/-3 matrix mixed pairs sum to zero, so a round's welfare
/// is 6 per mutual-C pair minus 6 per mutual-D pair.
pub fn run() -> Verdict {
    let spec = BatchSpec::from_toml(SPEC, Path::new(".")).expect("spec parses");
    let logs = run_batch(&spec, None).expect("batch runs");
    let (mut checked, mut bad, mut short) = (0usize, Vec::new(), 0usize);
    for (i, log) in logs.iter().enumerate() {
        let rs = rounds(log);
        short += (rs.len() < 25) as usize;
        for r in &rs {
            let n = r.links.len();
            let (mut cc, mut dd) = (0i64, 0i64);
            for a in 0..n {
                for &b in r.links[a].iter().filter(|&&b| b > a) {
                    match (r.actual[a], r.actual[b]) {
                        (Some(Action::C), Some(Action::C)) => cc += 1,
                        (Some(Action::D), Some(Action::D)) => dd += 1,
                        _ => {}
                    }
                }
            }
            let paid: i64 = r.pair_points.iter().map(|(_, p)| p[0] + p[1]).sum();
            let expected = 6 * (cc - dd);
            if r.welfare != expected || paid != expected {
                bad.push(format!("log {i} round {}: logged {} paid {paid} expected {expected}", r.round, r.welfare));
            }
            checked += 1;
        }
    }
    Verdict::new(
        bad.is_empty() && short == 0 && logs.len() == 32,
        format!("{} logs, {checked} rounds, {} mismatches, {short} logs under 25 rounds {}", logs.len(), bad.len(), bad.first().cloned().unwrap_or_default()),
    )
}
