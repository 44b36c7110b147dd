use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{partial_shuffle, GameError, Pair, PlayerId};
use crate::log::{EventLog, Record};

/// What one player is paid at the end of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerPayment {
    pub player: PlayerId,
    pub rounds: Vec<u32>,
    /// Partners drawn for each selected round, aligned with `rounds`.
    pub partners: Vec<Vec<PlayerId>>,
    pub points: i64,
    pub ecu: i64,
    pub sgd: f64,
}

impl PlayerPayment {
    pub fn to_record(&self) -> Record {
        Record::Payment {
            player: self.player,
            rounds: self.rounds.clone(),
            partners: self.partners.clone(),
            points: self.points,
            ecu: self.ecu,
            sgd: self.sgd,
        }
    }
}

/// Draws the paid rounds (shared by all players) and, per player and paid
/// round, the partners whose interaction counts. Unlinked partners pay 0.
/// Points are ECU one-to-one; SGD is rounded to cents.
pub fn compute_payment(log: &EventLog, rng: &mut impl Rng) -> Result<Vec<PlayerPayment>, GameError> {
    let cfg = &log.header.config;
    let mut rounds: Vec<u32> = log
        .records
        .iter()
        .filter_map(|r| match r {
            Record::RoundSummary { round, .. } => Some(*round),
            _ => None,
        })
        .collect();
    if rounds.len() < cfg.payment_rounds {
        return Err(GameError::TooFewRounds { played: rounds.len(), required: cfg.payment_rounds });
    }
    let mut points: BTreeMap<(u32, Pair), [i64; 2]> = BTreeMap::new();
    for r in &log.records {
        if let Record::PairPayoff { round, pair, points: pts } = r {
            points.insert((*round, *pair), *pts);
        }
    }
    let selected = partial_shuffle(&mut rounds, cfg.payment_rounds, rng);
    let mut out = Vec::with_capacity(cfg.group_size);
    for i in 0..cfg.group_size {
        let me = PlayerId(i);
        let mut total = 0i64;
        let mut partners = Vec::with_capacity(selected.len());
        for &round in &selected {
            let mut others: Vec<PlayerId> = (0..cfg.group_size).filter(|&j| j != i).map(PlayerId).collect();
            let picks = partial_shuffle(&mut others, cfg.payment_partners_per_round, rng);
            for &q in &picks {
                let pair = Pair::new(me, q).expect("distinct players");
                if let Some(pts) = points.get(&(round, pair)) {
                    total += if pair.lo() == me { pts[0] } else { pts[1] };
                }
            }
            partners.push(picks);
        }
        out.push(PlayerPayment {
            player: me,
            rounds: selected.clone(),
            partners,
            points: total,
            ecu: total,
            sgd: (total as f64 / cfg.ecu_per_sgd * 100.0).round() / 100.0,
        });
    }
    Ok(out)
}
