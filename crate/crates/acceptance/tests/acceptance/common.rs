//! Log walking written independently of the analysis module, so checks
//! do not grade the code with itself.

use std::collections::{BTreeMap, BTreeSet};

use repnet_core::game::{Action, OpportunityKind, Pair, PlayerId};
use repnet_core::log::{EventLog, Record};

#[derive(Debug, Clone, Default)]
pub struct RoundData {
    pub round: u32,
    pub opportunities: Vec<(Pair, OpportunityKind)>,
    pub remove: BTreeMap<usize, BTreeSet<usize>>,
    pub propose: BTreeMap<usize, BTreeSet<usize>>,
    pub accepted: BTreeMap<usize, BTreeSet<usize>>,
    pub links: Vec<Vec<usize>>,
    pub intended: Vec<Option<Action>>,
    pub actual: Vec<Option<Action>>,
    pub flipped: Vec<bool>,
    pub pair_points: Vec<(Pair, [i64; 2])>,
    pub welfare: i64,
}

impl RoundData {
    pub fn linked(&self, a: usize, b: usize) -> bool {
        self.links[a].contains(&b)
    }
}

pub fn rounds(log: &EventLog) -> Vec<RoundData> {
    let n = log.header.config.group_size;
    let mut out: BTreeMap<u32, RoundData> = BTreeMap::new();
    for r in &log.records {
        let Some(round) = r.round() else { continue };
        let d = out.entry(round).or_insert_with(|| RoundData {
            round,
            intended: vec![None; n],
            actual: vec![None; n],
            flipped: vec![false; n],
            ..Default::default()
        });
        let ids = |v: &[PlayerId]| v.iter().map(|p| p.0).collect::<BTreeSet<_>>();
        match r {
            Record::Opportunities { pairs, .. } => d.opportunities = pairs.iter().map(|o| (o.pair, o.kind)).collect(),
            Record::Stage1 { player, remove, propose, .. } => {
                d.remove.insert(player.0, ids(remove));
                d.propose.insert(player.0, ids(propose));
            }
            Record::Stage2 { player, accepted, .. } => {
                d.accepted.insert(player.0, ids(accepted));
            }
            Record::Links { neighbors, .. } => d.links = neighbors.clone(),
            Record::Action { player, intended, actual, flipped, .. } => {
                d.intended[player.0] = *intended;
                d.actual[player.0] = *actual;
                d.flipped[player.0] = *flipped;
            }
            Record::PairPayoff { pair, points, .. } => d.pair_points.push((*pair, *points)),
            Record::RoundSummary { welfare, .. } => d.welfare = *welfare,
            _ => {}
        }
    }
    out.into_values().collect()
}
