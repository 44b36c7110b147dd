use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repnet_core::agents::{Agent, LocalView};
use repnet_core::game::{Action, OpportunityKind, Session, Speed, Stage1Decision, Stage2Decision, TreatmentConfig};
use repnet_core::log::EventLog;
use repnet_core::sim::{run_with_agents, transcript};

use crate::common::rounds;
use crate::Verdict;

const CASES: u32 = 1000;

/// Ticks boxes and picks actions at random; every answer is a valid one.
struct RandomAgent {
    rng: ChaCha8Rng,
    remove: f64,
    propose: f64,
    accept: f64,
    cooperate: f64,
}

impl Agent for RandomAgent {
    fn stage1(&mut self, view: &LocalView) -> Stage1Decision {
        let mut d = Stage1Decision::default();
        for &q in &view.stage1.removable {
            if self.rng.random_bool(self.remove) {
                d.remove.insert(q);
            }
        }
        for &q in &view.stage1.proposable {
            if self.rng.random_bool(self.propose) {
                d.propose.insert(q);
            }
        }
        d
    }

    fn stage2(&mut self, view: &LocalView) -> Stage2Decision {
        Stage2Decision { accept: view.proposers.iter().copied().filter(|_| self.rng.random_bool(self.accept)).collect() }
    }

    fn action(&mut self, _: &LocalView) -> Action {
        if self.rng.random_bool(self.cooperate) {
            Action::C
        } else {
            Action::D
        }
    }
}

#[derive(Debug, Clone)]
struct Case {
    seed: u64,
    fast: bool,
    noisy: bool,
    probs: [f64; 4],
}

fn case() -> impl Strategy<Value = Case> {
    (any::<u64>(), any::<bool>(), any::<bool>(), [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64])
        .prop_map(|(seed, fast, noisy, probs)| Case { seed, fast, noisy, probs })
}

fn play(c: &Case) -> EventLog {
    let speed = if c.fast { Speed::Fast } else { Speed::Slow };
    let cfg = TreatmentConfig::standard(speed, c.noisy);
    let agents: Vec<Box<dyn Agent>> = (0..12)
        .map(|i| {
            Box::new(RandomAgent {
                rng: ChaCha8Rng::seed_from_u64(c.seed.wrapping_add(i)),
                remove: c.probs[0],
                propose: c.probs[1],
                accept: c.probs[2],
                cooperate: c.probs[3],
            }) as Box<dyn Agent>
        })
        .collect();
    run_with_agents(&cfg, "random", vec!["random".into(); 12], agents, c.seed).expect("valid decisions are accepted")
}

/// Checks every round's link changes and actions against the rules, then
/// replays the logged decisions through a fresh session.
fn check(c: &Case) -> Result<(), TestCaseError> {
    let log = play(c);
    let n = 12;
    let rs = rounds(&log);
    prop_assert!(rs.len() >= 25);
    let mut before: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| a != b).collect()).collect();
    for r in &rs {
        let now: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| r.linked(a, b)).collect()).collect();
        for (a, row) in now.iter().enumerate() {
            prop_assert!(!row[a]);
            for (b, &linked) in row.iter().enumerate() {
                prop_assert_eq!(linked, now[b][a], "round {} asymmetric at {},{}", r.round, a, b);
            }
        }
        let mut touched = vec![vec![false; n]; n];
        for (pair, kind) in &r.opportunities {
            let (a, b) = (pair.lo().0, pair.hi().0);
            touched[a][b] = true;
            touched[b][a] = true;
            let has = |m: &std::collections::BTreeMap<usize, std::collections::BTreeSet<usize>>, x: usize, y: usize| {
                m.get(&x).is_some_and(|s| s.contains(&y))
            };
            match kind {
                OpportunityKind::Removable => {
                    prop_assert!(before[a][b], "round {}: removable pair {a},{b} was not linked", r.round);
                    let cut = has(&r.remove, a, b) || has(&r.remove, b, a);
                    prop_assert_eq!(now[a][b], !cut, "round {} removal of {},{}", r.round, a, b);
                }
                OpportunityKind::Proposable => {
                    prop_assert!(!before[a][b], "round {}: proposable pair {a},{b} was linked", r.round);
                    let (pa, pb) = (has(&r.propose, a, b), has(&r.propose, b, a));
                    let formed = (pa && pb) || (pa && has(&r.accepted, b, a)) || (pb && has(&r.accepted, a, b));
                    prop_assert_eq!(now[a][b], formed, "round {} proposal between {},{}", r.round, a, b);
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                if !touched[a][b] {
                    prop_assert_eq!(now[a][b], before[a][b], "round {}: unsampled pair {},{} changed", r.round, a, b);
                }
            }
            let acting = now[a].iter().any(|&x| x);
            prop_assert_eq!(r.intended[a].is_some(), acting);
            prop_assert_eq!(r.actual[a].is_some(), acting);
            prop_assert_eq!(r.flipped[a], r.intended[a] != r.actual[a]);
            prop_assert!(c.noisy || !r.flipped[a]);
        }
        before = now;
    }

    let mut replay = Session::with_header(log.header.config.clone(), log.header.seed, log.header.treatment.clone(), log.header.roster.clone())
        .expect("header config is valid");
    for d in transcript(&log) {
        replay.play_round(&d).map_err(|e| TestCaseError::fail(e.to_string()))?;
    }
    replay.settle().map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(replay.log().to_ndjson() == log.to_ndjson(), "replay differs");
    prop_assert!(play(c).to_ndjson() == log.to_ndjson(), "rerun differs");
    Ok(())
}

pub fn run() -> Verdict {
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    match runner.run(&case(), |c| check(&c)) {
        Ok(()) => Verdict::new(
            true,
            format!("{CASES} random sessions: symmetric links, changes only on sampled pairs by the removal/proposal rules, exact replay"),
        ),
        Err(e) => Verdict::new(false, e.to_string()),
    }
}
