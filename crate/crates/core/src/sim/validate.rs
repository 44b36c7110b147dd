use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::game::{
    payoff, Action, NetworkState, OpportunityKind, Pair, PlayerId, RoundDecisions, Session, Stage1Decision,
    Stage2Decision,
};
use crate::log::{EventLog, LogError, Record, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u32 },
    #[error(transparent)]
    Log(LogError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rounds: u32,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed() { "pass" } else { "FAIL" };
            out.push_str(&format!("{status} {}\n", c.name));
            for f in c.failures.iter().take(10) {
                out.push_str(&format!("    {f}\n"));
            }
            if c.failures.len() > 10 {
                out.push_str(&format!("    ... {} more\n", c.failures.len() - 10));
            }
        }
        out
    }
}

pub fn validate_file(path: &Path) -> Result<ValidationReport, ValidationError> {
    match EventLog::read_from(path) {
        Ok(log) => validate_log(&log),
        Err(LogError::SchemaVersion { found, expected }) => Err(ValidationError::SchemaVersion { found, expected }),
        Err(e) => Err(ValidationError::Log(e)),
    }
}

/// Replays `log` through the engine and checks the structural invariants
/// record by record.
pub fn validate_log(log: &EventLog) -> Result<ValidationReport, ValidationError> {
    if log.header.schema_version != SCHEMA_VERSION {
        return Err(ValidationError::SchemaVersion {
            found: log.header.schema_version as u64,
            expected: SCHEMA_VERSION,
        });
    }
    let checks = vec![
        Check { name: "ordering", failures: ordering(log) },
        Check { name: "replay", failures: replay(log) },
        Check { name: "welfare_identity", failures: welfare(log) },
        Check { name: "network_symmetry", failures: symmetry(log) },
        Check { name: "link_confinement", failures: confinement(log) },
        Check { name: "history_consistency", failures: history(log) },
    ];
    Ok(ValidationReport { rounds: log.rounds_played(), checks })
}

fn stage_rank(r: &Record) -> u8 {
    match r {
        Record::Header(_) => 0,
        Record::Opportunities { .. } => 1,
        Record::Stage1 { .. } => 2,
        Record::Stage2 { .. } => 3,
        Record::Links { .. } => 4,
        Record::Action { .. } => 5,
        Record::PairPayoff { .. } => 6,
        Record::RoundSummary { .. } => 7,
        Record::Termination { .. } => 8,
        Record::Payment { .. } => 9,
    }
}

fn ordering(log: &EventLog) -> Vec<String> {
    let mut fails = Vec::new();
    let mut last = (0u32, 0u8);
    for (i, r) in log.records.iter().enumerate() {
        let key = match r.round() {
            Some(round) => (round, stage_rank(r)),
            None => (u32::MAX, stage_rank(r)),
        };
        if key < last {
            fails.push(format!("record {}: {:?} appears after round {} stage {}", i + 1, key, last.0, last.1));
        }
        last = key;
    }
    let rounds = log.rounds_played();
    for round in 1..=rounds {
        let count = |f: fn(&Record) -> bool| log.round_records(round).filter(|r| f(r)).count();
        for (what, n) in [
            ("opportunities", count(|r| matches!(r, Record::Opportunities { .. }))),
            ("links", count(|r| matches!(r, Record::Links { .. }))),
            ("round_summary", count(|r| matches!(r, Record::RoundSummary { .. }))),
            ("termination", count(|r| matches!(r, Record::Termination { .. }))),
        ] {
            if n != 1 {
                fails.push(format!("round {round}: {n} {what} records"));
            }
        }
    }
    fails
}

/// Reconstructs every round's decisions from the log.
pub fn transcript(log: &EventLog) -> Vec<RoundDecisions> {
    let n = log.header.config.group_size;
    (1..=log.rounds_played())
        .map(|round| {
            let mut d = RoundDecisions {
                stage1: vec![Stage1Decision::default(); n],
                stage2: vec![Stage2Decision::default(); n],
                stage3: vec![None; n],
            };
            for r in log.round_records(round) {
                match r {
                    Record::Stage1 { player, remove, propose, .. } if player.0 < n => {
                        d.stage1[player.0] = Stage1Decision {
                            remove: remove.iter().copied().collect(),
                            propose: propose.iter().copied().collect(),
                        };
                    }
                    Record::Stage2 { player, accepted, .. } if player.0 < n => {
                        d.stage2[player.0] = Stage2Decision { accept: accepted.iter().copied().collect() };
                    }
                    Record::Action { player, intended, .. } if player.0 < n => d.stage3[player.0] = *intended,
                    _ => {}
                }
            }
            d
        })
        .collect()
}

fn replay(log: &EventLog) -> Vec<String> {
    let h = &log.header;
    let mut session = match Session::with_header(h.config.clone(), h.seed, h.treatment.clone(), h.roster.clone()) {
        Ok(s) => s,
        Err(e) => return vec![format!("header rejected: {e}")],
    };
    for (i, decisions) in transcript(log).iter().enumerate() {
        if session.is_ended() {
            return vec![format!("round {}: session had already terminated", i + 1)];
        }
        if let Err(e) = session.play_round(decisions) {
            return vec![format!("round {}: {e}", i + 1)];
        }
    }
    let has_payment = log.records.iter().any(|r| matches!(r, Record::Payment { .. }));
    if has_payment {
        if let Err(e) = session.settle() {
            return vec![format!("payment: {e}")];
        }
    }
    let replayed = &session.log().records;
    for (i, (a, b)) in log.records.iter().zip(replayed).enumerate() {
        if a != b {
            let at = a.round().map(|r| format!("round {r}")).unwrap_or_else(|| "payment".into());
            return vec![format!("{at}, record {}: logged {a:?}, replay gives {b:?}", i + 1)];
        }
    }
    if log.records.len() != replayed.len() {
        return vec![format!("log has {} records, replay gives {}", log.records.len(), replayed.len())];
    }
    if !session.is_ended() {
        return vec!["log stops before the termination draw".into()];
    }
    Vec::new()
}

fn actual_actions(log: &EventLog, round: u32) -> BTreeMap<usize, Option<Action>> {
    log.round_records(round)
        .filter_map(|r| match r {
            Record::Action { player, actual, .. } => Some((player.0, *actual)),
            _ => None,
        })
        .collect()
}

fn welfare(log: &EventLog) -> Vec<String> {
    let m = log.header.config.payoff;
    let zero_sum_mixed = m.coop_vs_defect + m.defect_vs_coop == 0;
    let mut fails = Vec::new();
    for round in 1..=log.rounds_played() {
        let actual = actual_actions(log, round);
        let (mut total, mut cc, mut dd) = (0i64, 0usize, 0usize);
        for r in log.round_records(round) {
            match r {
                Record::PairPayoff { pair, points, .. } => {
                    total += points[0] + points[1];
                    let acts = (actual.get(&pair.lo().0).copied().flatten(), actual.get(&pair.hi().0).copied().flatten());
                    match acts {
                        (Some(a), Some(b)) => {
                            let (pa, pb) = payoff(&m, a, b);
                            if [pa, pb] != *points {
                                fails.push(format!("round {round}: pair {pair:?} scored {points:?}, actions give [{pa}, {pb}]"));
                            }
                            cc += (a == Action::C && b == Action::C) as usize;
                            dd += (a == Action::D && b == Action::D) as usize;
                        }
                        _ => fails.push(format!("round {round}: pair {pair:?} scored without two actions")),
                    }
                }
                Record::RoundSummary { welfare, mutual_cc, mutual_dd, .. } => {
                    if *mutual_cc != cc || *mutual_dd != dd {
                        fails.push(format!(
                            "round {round}: summary counts ({mutual_cc}, {mutual_dd}) but pairs give ({cc}, {dd})"
                        ));
                    }
                    if *welfare != total {
                        fails.push(format!("round {round}: welfare {welfare} but pair payoffs sum to {total}"));
                    }
                    let identity = 2 * m.cc_each * cc as i64 + 2 * m.dd_each * dd as i64;
                    if zero_sum_mixed && *welfare != identity {
                        fails.push(format!("round {round}: welfare {welfare} but mutual counts give {identity}"));
                    }
                }
                _ => {}
            }
        }
    }
    fails
}

fn links_of(log: &EventLog, round: u32) -> Option<&Vec<Vec<usize>>> {
    log.round_records(round).find_map(|r| match r {
        Record::Links { neighbors, .. } => Some(neighbors),
        _ => None,
    })
}

fn symmetry(log: &EventLog) -> Vec<String> {
    let n = log.header.config.group_size;
    let mut fails = Vec::new();
    for round in 1..=log.rounds_played() {
        let Some(adj) = links_of(log, round) else { continue };
        if adj.len() != n {
            fails.push(format!("round {round}: {} adjacency rows for {n} players", adj.len()));
            continue;
        }
        for (i, row) in adj.iter().enumerate() {
            for (k, &j) in row.iter().enumerate() {
                if j >= n || j == i || row[..k].contains(&j) {
                    fails.push(format!("round {round}: player {i} lists bad neighbor {j}"));
                } else if !adj[j].contains(&i) {
                    fails.push(format!("round {round}: link ({i}, {j}) is not reciprocated"));
                }
            }
        }
    }
    fails
}

fn network_of(adj: &[Vec<usize>]) -> Option<NetworkState> {
    let pairs = adj
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().filter_map(move |&j| Pair::new(PlayerId(i), PlayerId(j))));
    NetworkState::from_pairs(adj.len(), pairs)
}

fn confinement(log: &EventLog) -> Vec<String> {
    let n = log.header.config.group_size;
    let mut prev = NetworkState::complete(n);
    let mut fails = Vec::new();
    for round in 1..=log.rounds_played() {
        let Some(next) = links_of(log, round).and_then(|a| network_of(a)) else {
            fails.push(format!("round {round}: unreadable links record"));
            continue;
        };
        let ops: BTreeMap<Pair, OpportunityKind> = log
            .round_records(round)
            .find_map(|r| match r {
                Record::Opportunities { pairs, .. } => Some(pairs.iter().map(|o| (o.pair, o.kind)).collect()),
                _ => None,
            })
            .unwrap_or_default();
        for pair in Pair::enumerate(n) {
            let (before, after) = (prev.contains(pair), next.contains(pair));
            let allowed = match (before, after) {
                (true, false) => ops.get(&pair) == Some(&OpportunityKind::Removable),
                (false, true) => ops.get(&pair) == Some(&OpportunityKind::Proposable),
                _ => true,
            };
            if !allowed {
                fails.push(format!("round {round}: link {pair:?} changed without a matching opportunity"));
            }
        }
        prev = next;
    }
    fails
}

fn history(log: &EventLog) -> Vec<String> {
    let n = log.header.config.group_size;
    let eps = log.header.config.noise_eps;
    let mut fails = Vec::new();
    for round in 1..=log.rounds_played() {
        let adj = links_of(log, round);
        let mut seen = vec![0usize; n];
        let mut intended_c = 0usize;
        for r in log.round_records(round) {
            let Record::Action { player, intended, actual, flipped, .. } = r else { continue };
            let p = player.0;
            if p >= n {
                fails.push(format!("round {round}: action for unknown player {p}"));
                continue;
            }
            seen[p] += 1;
            intended_c += (*intended == Some(Action::C)) as usize;
            let linked = adj.is_some_and(|a| a.get(p).is_some_and(|row| !row.is_empty()));
            if linked != intended.is_some() || intended.is_some() != actual.is_some() {
                fails.push(format!("round {round}: player {p} NoAction does not match degree"));
            }
            if *flipped != (intended != actual) {
                fails.push(format!("round {round}: player {p} flip flag disagrees with actions"));
            }
            if eps == 0.0 && *flipped {
                fails.push(format!("round {round}: player {p} flipped with zero noise"));
            }
        }
        if let Some(p) = seen.iter().position(|&c| c != 1) {
            fails.push(format!("round {round}: player {p} has {} action records", seen[p]));
        }
        let expected = (intended_c * intended_c.saturating_sub(1) / 2) as f64 / (n * (n - 1) / 2) as f64;
        let logged = log.round_records(round).find_map(|r| match r {
            Record::RoundSummary { cooperation_rate, .. } => Some(*cooperation_rate),
            _ => None,
        });
        if logged.is_some_and(|c| (c - expected).abs() > 1e-12) {
            fails.push(format!("round {round}: cooperation rate {logged:?}, intended actions give {expected}"));
        }
    }
    fails
}
