//! Round-by-round reconstruction of what every player could see, built from
//! the log alone.

use std::collections::BTreeMap;

use crate::game::{Action, HistoryBook, HistoryWindow, NetworkState, Pair, PairOpportunity, PlayerId};
use crate::log::{EventLog, Record};

use super::LinkOrigin;

/// One round as seen from the log, with the state before its decisions.
pub(crate) struct RoundCtx<'a> {
    pub round: u32,
    /// Displayed histories before this round's decisions.
    pub histories: &'a [HistoryWindow],
    pub prev_intended: &'a [Option<Action>],
    pub prev_actual: &'a [Option<Action>],
    /// Network at the start of the round, which is the network played last round.
    pub start: &'a NetworkState,
    pub origins: &'a BTreeMap<Pair, LinkOrigin>,
    pub opportunities: &'a [PairOpportunity],
    pub stage1: &'a BTreeMap<PlayerId, (Vec<PlayerId>, Vec<PlayerId>)>,
    pub stage2: &'a BTreeMap<PlayerId, (Vec<PlayerId>, Vec<PlayerId>)>,
    /// Network the round was played on.
    pub played: &'a NetworkState,
    pub intended: &'a [Option<Action>],
}

impl RoundCtx<'_> {
    pub fn proposed(&self, p: PlayerId, q: PlayerId) -> bool {
        self.stage1.get(&p).is_some_and(|(_, prop)| prop.contains(&q))
    }
}

fn network_of(n: usize, adj: &[Vec<usize>]) -> NetworkState {
    let pairs = adj
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().filter_map(move |&j| Pair::new(PlayerId(i), PlayerId(j))));
    NetworkState::from_pairs(n, pairs).unwrap_or_else(|| NetworkState::empty(n))
}

/// Calls `f` once per round in order. Assumes a validated log.
pub(crate) fn walk(log: &EventLog, mut f: impl FnMut(&RoundCtx)) {
    let cfg = &log.header.config;
    let n = cfg.group_size;
    let mut book = HistoryBook::new(n, cfg.history_window);
    let mut prev_intended = vec![None; n];
    let mut prev_actual = vec![None; n];
    let mut start = NetworkState::complete(n);
    let mut origins: BTreeMap<Pair, LinkOrigin> = start.links().map(|p| (p, LinkOrigin::Default)).collect();

    for round in 1..=log.rounds_played() {
        let mut opportunities = Vec::new();
        let mut stage1 = BTreeMap::new();
        let mut stage2 = BTreeMap::new();
        let mut played = start.clone();
        let mut intended = vec![None; n];
        let mut actual = vec![None; n];
        for r in log.round_records(round) {
            match r {
                Record::Opportunities { pairs, .. } => opportunities = pairs.clone(),
                Record::Stage1 { player, remove, propose, .. } => {
                    stage1.insert(*player, (remove.clone(), propose.clone()));
                }
                Record::Stage2 { player, accepted, rejected, .. } => {
                    stage2.insert(*player, (accepted.clone(), rejected.clone()));
                }
                Record::Links { neighbors, .. } => played = network_of(n, neighbors),
                Record::Action { player, intended: i, actual: a, .. } if player.0 < n => {
                    intended[player.0] = *i;
                    actual[player.0] = *a;
                }
                _ => {}
            }
        }
        let ctx = RoundCtx {
            round,
            histories: book.all(),
            prev_intended: &prev_intended,
            prev_actual: &prev_actual,
            start: &start,
            origins: &origins,
            opportunities: &opportunities,
            stage1: &stage1,
            stage2: &stage2,
            played: &played,
            intended: &intended,
        };
        f(&ctx);

        let mut next_origins = BTreeMap::new();
        for pair in played.links() {
            let origin = match origins.get(&pair) {
                Some(&o) => o,
                None if ctx.proposed(pair.lo(), pair.hi()) && ctx.proposed(pair.hi(), pair.lo()) => {
                    LinkOrigin::MutualProposal
                }
                None => LinkOrigin::ProposalAcceptance,
            };
            next_origins.insert(pair, origin);
        }
        origins = next_origins;
        book.record(&actual);
        prev_intended = intended;
        prev_actual = actual;
        start = played;
    }
}
