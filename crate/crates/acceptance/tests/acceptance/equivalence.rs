use std::collections::BTreeMap;
use std::path::Path;

use repnet_core::agents::SeatSpec;
use repnet_core::game::Speed;
use repnet_core::log::EventLog;
use repnet_core::sim::{expand_roster, run_session};
use repnet_server::{LiveSession, Registry, SessionConfig};

use crate::Verdict;

const ROSTER: [&str; 6] = ["EmpiricalUnc:C*4", "EmpiricalNoUnc:D*3", "GrimNet", "TitForTatMajority*2", "AlwaysD", "AlwaysC"];

fn config(id: &str, speed: Speed, unc: bool, seed: u64, log_dir: &Path) -> SessionConfig {
    let seats: Vec<String> = ROSTER.iter().map(|s| format!("{s:?}")).collect();
    let speed = if speed == Speed::Fast { "fast" } else { "slow" };
    let text = format!(
        "session_id = {id:?}\nspeed = {speed:?}\nuncertainty = {unc}\nseed = {seed}\nlog_dir = {:?}\nseats = [{}]\n",
        log_dir.display().to_string(),
        seats.join(", ")
    );
    SessionConfig::from_toml(&text, Path::new("/")).expect("session config parses")
}

fn headless(cfg: &SessionConfig, speed: Speed) -> EventLog {
    let names: Vec<String> = ROSTER.iter().map(|s| s.to_string()).collect();
    let seats: Vec<SeatSpec> = expand_roster(&names)
        .expect("roster expands")
        .iter()
        .map(|s| SeatSpec::resolve(s, speed, &BTreeMap::new()).expect("known strategy"))
        .collect();
    run_session(&cfg.config, &cfg.treatment, &seats, cfg.seed).expect("session runs")
}

/// First differing line, if any.
fn diff(got: &str, want: &str) -> Option<String> {
    if got == want {
        return None;
    }
    let line = got.lines().zip(want.lines()).position(|(g, w)| g != w).unwrap_or(got.lines().count().min(want.lines().count()));
    Some(format!("first difference at line {}", line + 1))
}

pub fn run() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let registry = runtime.block_on(async { Registry::new() });
    let mut checked = 0;
    for (speed, unc) in [(Speed::Slow, false), (Speed::Slow, true), (Speed::Fast, false), (Speed::Fast, true)] {
        for seed in [3u64, 58] {
            let id = format!("eq{checked}");
            let cfg = config(&id, speed, unc, seed, dir.path());
            let want = headless(&cfg, speed).to_ndjson();

            let live = LiveSession::new(cfg.clone(), 0).expect("live session starts");
            if let Some(d) = diff(&live.log().to_ndjson(), &want) {
                return Verdict::new(false, format!("{} seed {seed}, in-process: {d}", cfg.treatment));
            }

            let served = runtime.block_on(async {
                let created = registry.create_session(cfg.clone()).expect("session registers");
                created.finished.await.expect("session task").expect("log written")
            });
            let text = std::fs::read_to_string(&served).expect("served log readable");
            if let Some(d) = diff(&text, &want) {
                return Verdict::new(false, format!("{} seed {seed}, served: {d}", cfg.treatment));
            }
            checked += 1;
        }
    }
    Verdict::new(true, format!("{checked} all-bot sessions over 4 cells: in-process and served logs byte-identical to headless"))
}
