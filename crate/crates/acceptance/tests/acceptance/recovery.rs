//! Plays sessions with known strategy parameters and checks that the analysis
//! tables read them back. Expected values come from walking the logs here,
//! not from the analysis module.

use repnet_core::agents::{BucketProbs, SeatSpec, StrategyParams};
use repnet_core::analysis::{
    action_punishment_curve, extract_opportunities, forgiveness_table, leniency_table, opportunism_rate, FBins,
    HISTORY_ROUNDS, MAIN_ROUNDS,
};
use repnet_core::game::{Action, Speed, TreatmentConfig};
use repnet_core::log::EventLog;
use repnet_core::sim::run_session;

use crate::common::{rounds, RoundData};
use crate::Verdict;

const OPPORTUNISM: f64 = 0.3;
const MAX_SESSIONS: u64 = 1200;
/// Every comparison is held to this many standard errors.
const Z: f64 = 3.0;

fn planted() -> StrategyParams {
    let probs = |low, medium, high| BucketProbs { low, medium, high, unrated: None };
    StrategyParams {
        remove_prob: probs(0.4, 0.15, 0.05),
        propose_prob: probs(0.2, 0.5, 0.8),
        accept_prob: probs(0.2, 0.5, 0.8),
        action_intercept: -2.0,
        action_slope: 4.0,
        opportunism_prob: OPPORTUNISM,
        initial_action: Action::C,
    }
}

fn reaction(f: f64) -> f64 {
    1.0 / (1.0 + (2.0 - 4.0 * f).exp())
}

/// Whether `p`'s last five actual actions before round index `t` hold at
/// least four C; None while fewer than five rounds are recorded.
fn high_before(rs: &[RoundData], t: usize, p: usize) -> Option<bool> {
    (t >= 5).then(|| rs[t - 5..t].iter().filter(|r| r.actual[p] == Some(Action::C)).count() >= 4)
}

/// Share of last round's neighbors whose actual action was D.
fn defecting_fraction(prev: &RoundData, p: usize) -> f64 {
    let seen: Vec<Action> = prev.links[p].iter().filter_map(|&q| prev.actual[q]).collect();
    if seen.is_empty() {
        0.0
    } else {
        seen.iter().filter(|&&a| a == Action::D).count() as f64 / seen.len() as f64
    }
}

fn bin_of(f: f64) -> usize {
    if f == 0.0 {
        0
    } else {
        (f * 4.0).ceil() as usize
    }
}

#[derive(Default)]
struct Walk {
    /// 1 - r(f) for every High observation in the history window rounds.
    high_keep_c: Vec<f64>,
    high_defections: usize,
    /// Per bin: predicted P(D) of each observation, and observed defections.
    curve: Vec<(Vec<f64>, usize)>,
}

fn walk(logs: &[EventLog]) -> Walk {
    let mut w = Walk { curve: vec![(Vec::new(), 0); 5], ..Walk::default() };
    for log in logs {
        let rs = rounds(log);
        for t in 1..rs.len() {
            let round = rs[t].round;
            for p in 0..12 {
                let Some(now) = rs[t].intended[p] else { continue };
                let f = defecting_fraction(&rs[t - 1], p);
                let high = high_before(&rs, t, p) == Some(true);
                let d = (now == Action::D) as usize;
                if high && HISTORY_ROUNDS.contains(&round) {
                    w.high_keep_c.push(1.0 - reaction(f));
                    w.high_defections += d;
                }
                if MAIN_ROUNDS.contains(&round) && rs[t - 1].intended[p] == Some(Action::C) {
                    let o = if high { OPPORTUNISM } else { 0.0 };
                    let cell = &mut w.curve[bin_of(f)];
                    cell.0.push(1.0 - (1.0 - reaction(f)) * (1.0 - o));
                    cell.1 += d;
                }
            }
        }
    }
    w
}

fn sessions(from: u64, to: u64) -> Vec<EventLog> {
    let cfg = TreatmentConfig::standard(Speed::Fast, true);
    let roster: Vec<SeatSpec> = (0..12).map(|_| SeatSpec { name: "Planted".into(), params: planted() }).collect();
    (from..to).map(|seed| run_session(&cfg, "planted", &roster, seed).expect("session runs")).collect()
}

fn low_removals(logs: &[EventLog]) -> (usize, usize) {
    let cells = leniency_table(&extract_opportunities(logs, HISTORY_ROUNDS));
    cells.iter().find(|c| c.bucket == repnet_core::agents::HistoryBucket::Low).map_or((0, 0), |c| (c.n, c.hits))
}

pub fn run() -> Verdict {
    let mut logs = Vec::new();
    let mut next = 0;
    // Grow the sample until the Low-bucket removal rate is pinned to 0.02.
    loop {
        logs.extend(sessions(next, next + 50));
        next += 50;
        let (n, _) = low_removals(&logs);
        if n > 0 && (0.4 * 0.6 / n as f64).sqrt() < 0.02 || next >= MAX_SESSIONS {
            break;
        }
    }
    let mut fails = Vec::new();
    let mut notes = Vec::new();
    let within = |fails: &mut Vec<String>, name: String, got: f64, want: f64, se: f64| {
        if (got - want).abs() > Z * se {
            fails.push(format!("{name} {got:.3} vs {want:.3} (se {se:.3})"));
        }
    };

    let obs = extract_opportunities(&logs, HISTORY_ROUNDS);
    let params = planted();
    let mut cells = leniency_table(&obs);
    cells.extend(forgiveness_table(&obs, true).into_iter().filter(|c| c.subset != "proposal_or_acceptance"));
    for c in &cells {
        let want = match c.subset {
            "removal" => params.remove_prob.get(c.bucket),
            "proposal" => params.propose_prob.get(c.bucket),
            _ => params.accept_prob.get(c.bucket),
        };
        if c.n < 30 {
            notes.push(format!("{} {} n={}", c.subset, c.bucket.as_str(), c.n));
            continue;
        }
        let se = (want * (1.0 - want) / c.n as f64).sqrt();
        within(&mut fails, format!("{} {}", c.subset, c.bucket.as_str()), c.freq().unwrap_or(0.0), want, se);
    }
    let (low_n, low_hits) = low_removals(&logs);
    let low = low_hits as f64 / low_n.max(1) as f64;

    let w = walk(&logs);
    let row = &opportunism_rate(&logs, HISTORY_ROUNDS)[0];
    let n_high = w.high_keep_c.len();
    if row.n_at_least_4 != n_high || row.d_at_least_4 != w.high_defections {
        fails.push(format!("opportunism counts {}/{} vs walk {}/{}", row.d_at_least_4, row.n_at_least_4, w.high_defections, n_high));
    }
    let rate = row.rate().unwrap_or(0.0);
    let keep = w.high_keep_c.iter().sum::<f64>() / n_high.max(1) as f64;
    let o_hat = 1.0 - (1.0 - rate) / keep;
    let o_se = (rate * (1.0 - rate) / n_high.max(1) as f64).sqrt() / keep;
    within(&mut fails, "opportunism".into(), o_hat, OPPORTUNISM, o_se);

    let curve = action_punishment_curve(&logs, &FBins::default(), MAIN_ROUNDS);
    for (i, cell) in curve.iter().enumerate() {
        let (preds, d) = &w.curve[i];
        if cell.n != preds.len() || cell.defections != *d {
            fails.push(format!("curve bin {} counts {}/{} vs walk {d}/{}", cell.bin, cell.defections, cell.n, preds.len()));
            continue;
        }
        if cell.n < 30 {
            notes.push(format!("curve {} n={}", cell.bin, cell.n));
            continue;
        }
        let want = preds.iter().sum::<f64>() / cell.n as f64;
        let se = preds.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt() / cell.n as f64;
        within(&mut fails, format!("curve {}", cell.bin), cell.freq().unwrap_or(0.0), want, se);
    }

    let skipped = if notes.is_empty() { String::new() } else { format!("; too few to test: {}", notes.join(", ")) };
    let summary = format!(
        "{next} sessions; low removal {low:.3} (n={low_n}) vs 0.400; opportunism {o_hat:.3} +/- {o_se:.3} vs {OPPORTUNISM}{skipped}"
    );
    if fails.is_empty() {
        Verdict::new(true, summary)
    } else {
        Verdict::new(false, format!("{summary}; off by more than {Z} se: {}", fails.join("; ")))
    }
}
