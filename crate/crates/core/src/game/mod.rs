//! Single-session state machine for the three-stage round protocol.
//!
//! A round runs: pair sampling and stage-1 link decisions, stage-2 replies to
//! one-sided proposals, batch link resolution, stage-3 actions with noise,
//! payoffs, then the termination draw. [`Session`] exposes each stage
//! separately so a live server can collect decisions between them;
//! [`Session::play_round`] runs a whole round from a complete transcript.

mod config;
mod history;
mod network;
mod payment;

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::{EventLog, Header, Record, SCHEMA_VERSION};
use crate::rng;

pub use config::{PayoffMatrix, Speed, TreatmentConfig};
pub use history::{HistoryBook, HistoryWindow};
pub use network::{NetworkState, Pair};
pub use payment::{compute_payment, PlayerPayment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    C,
    D,
}

impl Action {
    pub fn flipped(self) -> Self {
        match self {
            Action::C => Action::D,
            Action::D => Action::C,
        }
    }
}

/// Intended and implemented action of one player in one round.
/// Both are `None` when the player had no neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub intended: Option<Action>,
    pub actual: Option<Action>,
    pub flipped: bool,
}

impl ActionRecord {
    pub const NO_ACTION: ActionRecord = ActionRecord { intended: None, actual: None, flipped: false };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpportunityKind {
    Removable,
    Proposable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairOpportunity {
    pub pair: Pair,
    pub kind: OpportunityKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Prompt {
    pub removable: Vec<PlayerId>,
    pub proposable: Vec<PlayerId>,
}

impl Stage1Prompt {
    pub fn is_empty(&self) -> bool {
        self.removable.is_empty() && self.proposable.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Decision {
    pub remove: BTreeSet<PlayerId>,
    pub propose: BTreeSet<PlayerId>,
}

/// Reply to pending proposals; proposers not listed are rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage2Decision {
    pub accept: BTreeSet<PlayerId>,
}

/// Every input a round needs, indexed by player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundDecisions {
    pub stage1: Vec<Stage1Decision>,
    pub stage2: Vec<Stage2Decision>,
    /// Intended action per player; ignored for players left without neighbors.
    pub stage3: Vec<Option<Action>>,
}

impl RoundDecisions {
    /// No link changes; everyone intends `action`.
    pub fn passive_all(players: usize, action: Action) -> Self {
        Self {
            stage1: vec![Stage1Decision::default(); players],
            stage2: vec![Stage2Decision::default(); players],
            stage3: vec![Some(action); players],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Stage1,
    Stage2,
    Stage3,
    Outcome,
    Ended,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub opportunities: Vec<PairOpportunity>,
    pub removals: Vec<Vec<PlayerId>>,
    pub proposals: Vec<Vec<PlayerId>>,
    /// Per recipient: (proposer, accepted).
    pub acceptances: Vec<Vec<(PlayerId, bool)>>,
    pub network_after_links: NetworkState,
    pub actions: Vec<ActionRecord>,
    pub pair_points: Vec<(Pair, i64, i64)>,
    pub cooperation_rate: f64,
    pub intended_cooperators: f64,
    pub welfare: i64,
}

impl RoundRecord {
    /// Linked pairs where both actual actions are C, and where both are D.
    pub fn mutual_counts(&self) -> (usize, usize) {
        let mut cc = 0;
        let mut dd = 0;
        for (pair, _, _) in &self.pair_points {
            match (self.actions[pair.lo().0].actual, self.actions[pair.hi().0].actual) {
                (Some(Action::C), Some(Action::C)) => cc += 1,
                (Some(Action::D), Some(Action::D)) => dd += 1,
                _ => {}
            }
        }
        (cc, dd)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("protocol violation by player {player} on pair ({player}, {counterpart}): {reason}")]
    ProtocolViolation { player: PlayerId, counterpart: PlayerId, reason: String },
    #[error("expected {expected} entries, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("player {0} has neighbors but supplied no action")]
    MissingAction(PlayerId),
    #[error("operation requires phase {expected:?}, session is in {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("session has {played} rounds but payment needs {required}")]
    TooFewRounds { played: usize, required: usize },
}

/// Draws `x` distinct pairs uniformly without replacement: a partial
/// Fisher-Yates shuffle over the lexicographic pair enumeration. The
/// opportunities are returned in draw order, tagged against `network`.
pub fn sample_pairs(network: &NetworkState, x: usize, rng: &mut impl Rng) -> Vec<PairOpportunity> {
    let mut pool = Pair::enumerate(network.size());
    partial_shuffle(&mut pool, x, rng)
        .into_iter()
        .map(|pair| PairOpportunity {
            pair,
            kind: if network.contains(pair) {
                OpportunityKind::Removable
            } else {
                OpportunityKind::Proposable
            },
        })
        .collect()
}

/// Splits sampled pairs into each player's removable and proposable lists.
pub fn stage1_prompts(players: usize, opportunities: &[PairOpportunity]) -> Vec<Stage1Prompt> {
    let mut prompts = vec![Stage1Prompt::default(); players];
    for op in opportunities {
        for (me, other) in [(op.pair.lo(), op.pair.hi()), (op.pair.hi(), op.pair.lo())] {
            let p = &mut prompts[me.0];
            match op.kind {
                OpportunityKind::Removable => p.removable.push(other),
                OpportunityKind::Proposable => p.proposable.push(other),
            }
        }
    }
    for p in &mut prompts {
        p.removable.sort();
        p.proposable.sort();
    }
    prompts
}

fn check_stage1(prompts: &[Stage1Prompt], decisions: &[Stage1Decision]) -> Result<(), GameError> {
    if decisions.len() != prompts.len() {
        return Err(GameError::WrongArity { expected: prompts.len(), got: decisions.len() });
    }
    for (i, (prompt, dec)) in prompts.iter().zip(decisions).enumerate() {
        let player = PlayerId(i);
        for &q in &dec.remove {
            if !prompt.removable.contains(&q) {
                return Err(GameError::ProtocolViolation {
                    player,
                    counterpart: q,
                    reason: "removal of a pair not offered for removal".into(),
                });
            }
        }
        for &q in &dec.propose {
            if !prompt.proposable.contains(&q) {
                return Err(GameError::ProtocolViolation {
                    player,
                    counterpart: q,
                    reason: "proposal on a pair not offered for proposal".into(),
                });
            }
        }
    }
    Ok(())
}

/// Recipients of one-sided proposals: for each player, the counterparts who
/// proposed to them while they did not propose back.
pub fn stage2_prompts(
    players: usize,
    opportunities: &[PairOpportunity],
    stage1: &[Stage1Decision],
) -> Vec<Vec<PlayerId>> {
    let mut pending = vec![Vec::new(); players];
    for op in opportunities.iter().filter(|o| o.kind == OpportunityKind::Proposable) {
        let (a, b) = (op.pair.lo(), op.pair.hi());
        let a_prop = stage1[a.0].propose.contains(&b);
        let b_prop = stage1[b.0].propose.contains(&a);
        if a_prop && !b_prop {
            pending[b.0].push(a);
        } else if b_prop && !a_prop {
            pending[a.0].push(b);
        }
    }
    for p in &mut pending {
        p.sort();
    }
    pending
}

fn check_stage2(pending: &[Vec<PlayerId>], decisions: &[Stage2Decision]) -> Result<(), GameError> {
    if decisions.len() != pending.len() {
        return Err(GameError::WrongArity { expected: pending.len(), got: decisions.len() });
    }
    for (i, (pend, dec)) in pending.iter().zip(decisions).enumerate() {
        if let Some(&q) = dec.accept.iter().find(|q| !pend.contains(q)) {
            return Err(GameError::ProtocolViolation {
                player: PlayerId(i),
                counterpart: q,
                reason: "acceptance without a pending one-sided proposal".into(),
            });
        }
    }
    Ok(())
}

/// Commits all link changes of a round in one batch. Removal is unilateral;
/// formation needs both proposals or a proposal plus an acceptance.
pub fn resolve_links(
    network: &NetworkState,
    opportunities: &[PairOpportunity],
    stage1: &[Stage1Decision],
    stage2: &[Stage2Decision],
) -> Result<NetworkState, GameError> {
    let players = network.size();
    check_stage1(&stage1_prompts(players, opportunities), stage1)?;
    check_stage2(&stage2_prompts(players, opportunities, stage1), stage2)?;
    let mut next = network.clone();
    for op in opportunities {
        let (a, b) = (op.pair.lo(), op.pair.hi());
        match op.kind {
            OpportunityKind::Removable => {
                if stage1[a.0].remove.contains(&b) || stage1[b.0].remove.contains(&a) {
                    next.remove(op.pair);
                }
            }
            OpportunityKind::Proposable => {
                let a_prop = stage1[a.0].propose.contains(&b);
                let b_prop = stage1[b.0].propose.contains(&a);
                let formed = (a_prop && b_prop)
                    || (a_prop && stage2[b.0].accept.contains(&a))
                    || (b_prop && stage2[a.0].accept.contains(&b));
                if formed {
                    next.insert(op.pair);
                }
            }
        }
    }
    Ok(next)
}

/// Implements an intended action under noise. One uniform draw per acting
/// player; players without an action consume nothing.
pub fn apply_noise(intended: Option<Action>, eps: f64, rng: &mut impl Rng) -> ActionRecord {
    match intended {
        None => ActionRecord::NO_ACTION,
        Some(a) => {
            let flip = rng.random::<f64>() < eps;
            ActionRecord {
                intended: Some(a),
                actual: Some(if flip { a.flipped() } else { a }),
                flipped: flip,
            }
        }
    }
}

pub fn payoff(matrix: &PayoffMatrix, a: Action, b: Action) -> (i64, i64) {
    match (a, b) {
        (Action::C, Action::C) => (matrix.cc_each, matrix.cc_each),
        (Action::C, Action::D) => (matrix.coop_vs_defect, matrix.defect_vs_coop),
        (Action::D, Action::C) => (matrix.defect_vs_coop, matrix.coop_vs_defect),
        (Action::D, Action::D) => (matrix.dd_each, matrix.dd_each),
    }
}

/// Share of all unordered player pairs (linked or not) in which both players
/// intended C.
pub fn cooperation_rate(actions: &[ActionRecord], group_size: usize) -> f64 {
    let k = actions.iter().filter(|a| a.intended == Some(Action::C)).count();
    let total = group_size * (group_size - 1) / 2;
    (k * k.saturating_sub(1) / 2) as f64 / total as f64
}

/// Share of players who intended C.
pub fn intended_cooperators(actions: &[ActionRecord], group_size: usize) -> f64 {
    actions.iter().filter(|a| a.intended == Some(Action::C)).count() as f64 / group_size as f64
}

/// Termination draw after `round`. No draw happens before `min_rounds`.
/// Returns `(drawn, terminate)`.
pub fn should_terminate(round: u32, config: &TreatmentConfig, rng: &mut impl Rng) -> (bool, bool) {
    if round < config.min_rounds {
        return (false, false);
    }
    let u: f64 = rng.random();
    (true, u >= config.continue_prob_after_min)
}

struct Streams {
    pairs: ChaCha8Rng,
    noise: ChaCha8Rng,
    termination: ChaCha8Rng,
    payment: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            pairs: rng::stream(seed, "pairs"),
            noise: rng::stream(seed, "noise"),
            termination: rng::stream(seed, "termination"),
            payment: rng::stream(seed, "payment"),
        }
    }
}

/// Data collected for the round in progress.
#[derive(Debug, Clone)]
struct PendingRound {
    opportunities: Vec<PairOpportunity>,
    prompts: Vec<Stage1Prompt>,
    stage1: Option<Vec<Stage1Decision>>,
    pending: Vec<Vec<PlayerId>>,
    stage2: Option<Vec<Stage2Decision>>,
    network_after: Option<NetworkState>,
}

/// Full mutable state of one running session.
pub struct Session {
    config: TreatmentConfig,
    round: u32,
    network: NetworkState,
    histories: HistoryBook,
    last_intended: Vec<Option<Action>>,
    last_record: Option<RoundRecord>,
    phase: Phase,
    streams: Streams,
    current: Option<PendingRound>,
    log: EventLog,
    payments: Option<Vec<PlayerPayment>>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("round", &self.round)
            .field("phase", &self.phase)
            .field("links", &self.network.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: TreatmentConfig, seed: u64) -> Result<Self, GameError> {
        let roster = vec![String::new(); config.group_size];
        Self::with_header(config, seed, String::new(), roster)
    }

    /// Starts a session whose log header names the treatment and seat roster.
    pub fn with_header(
        config: TreatmentConfig,
        seed: u64,
        treatment: String,
        roster: Vec<String>,
    ) -> Result<Self, GameError> {
        config.validate()?;
        if roster.len() != config.group_size {
            return Err(GameError::WrongArity { expected: config.group_size, got: roster.len() });
        }
        let n = config.group_size;
        let header = Header { schema_version: SCHEMA_VERSION, treatment, config: config.clone(), roster, seed };
        Ok(Self {
            round: 1,
            network: NetworkState::complete(n),
            histories: HistoryBook::new(n, config.history_window),
            last_intended: vec![None; n],
            last_record: None,
            phase: Phase::Stage1,
            streams: Streams::new(seed),
            current: None,
            log: EventLog::new(header),
            payments: None,
            config,
        })
    }

    pub fn config(&self) -> &TreatmentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.log.header.seed
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_ended(&self) -> bool {
        self.phase == Phase::Ended
    }

    /// Network at the start of the current round (or after links once stage 2 resolved).
    pub fn network(&self) -> &NetworkState {
        &self.network
    }

    pub fn history(&self, p: PlayerId) -> &HistoryWindow {
        self.histories.get(p.0)
    }

    pub fn histories(&self) -> &[HistoryWindow] {
        self.histories.all()
    }

    pub fn last_intended(&self, p: PlayerId) -> Option<Action> {
        self.last_intended[p.0]
    }

    pub fn last_record(&self) -> Option<&RoundRecord> {
        self.last_record.as_ref()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn payments(&self) -> Option<&[PlayerPayment]> {
        self.payments.as_deref()
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), GameError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(GameError::WrongPhase { expected, actual: self.phase })
        }
    }

    /// Samples this round's pairs and returns every player's stage-1 prompt.
    /// Calling it again before stage 1 is submitted returns the same prompts.
    pub fn open_round(&mut self) -> Result<Vec<Stage1Prompt>, GameError> {
        self.expect_phase(Phase::Stage1)?;
        if let Some(cur) = &self.current {
            return Ok(cur.prompts.clone());
        }
        let opportunities = sample_pairs(&self.network, self.config.pairs_per_round, &mut self.streams.pairs);
        let prompts = stage1_prompts(self.config.group_size, &opportunities);
        self.log.push(Record::Opportunities { round: self.round, pairs: opportunities.clone() });
        self.current = Some(PendingRound {
            opportunities,
            prompts: prompts.clone(),
            stage1: None,
            pending: Vec::new(),
            stage2: None,
            network_after: None,
        });
        Ok(prompts)
    }

    pub fn opportunities(&self) -> Option<&[PairOpportunity]> {
        self.current.as_ref().map(|c| c.opportunities.as_slice())
    }

    pub fn stage1_prompt(&self, p: PlayerId) -> Option<&Stage1Prompt> {
        self.current.as_ref().map(|c| &c.prompts[p.0])
    }

    /// Commits stage-1 decisions and returns each player's pending proposers.
    pub fn submit_stage1(&mut self, decisions: Vec<Stage1Decision>) -> Result<Vec<Vec<PlayerId>>, GameError> {
        self.expect_phase(Phase::Stage1)?;
        if self.current.is_none() {
            self.open_round()?;
        }
        let round = self.round;
        let cur = self.current.as_mut().expect("round opened");
        check_stage1(&cur.prompts, &decisions)?;
        for (i, (prompt, dec)) in cur.prompts.iter().zip(&decisions).enumerate() {
            if !prompt.is_empty() {
                self.log.push(Record::Stage1 {
                    round,
                    player: PlayerId(i),
                    remove: dec.remove.iter().copied().collect(),
                    propose: dec.propose.iter().copied().collect(),
                });
            }
        }
        cur.pending = stage2_prompts(self.config.group_size, &cur.opportunities, &decisions);
        cur.stage1 = Some(decisions);
        self.phase = Phase::Stage2;
        Ok(cur.pending.clone())
    }

    pub fn pending_proposers(&self, p: PlayerId) -> &[PlayerId] {
        self.current.as_ref().and_then(|c| c.pending.get(p.0)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Commits stage-2 replies, resolves all link changes and returns the
    /// network the round will be played on.
    pub fn submit_stage2(&mut self, decisions: Vec<Stage2Decision>) -> Result<&NetworkState, GameError> {
        self.expect_phase(Phase::Stage2)?;
        let round = self.round;
        let cur = self.current.as_mut().expect("round opened");
        let stage1 = cur.stage1.as_ref().expect("stage 1 committed");
        check_stage2(&cur.pending, &decisions)?;
        let next = resolve_links(&self.network, &cur.opportunities, stage1, &decisions)?;
        for (i, (pend, dec)) in cur.pending.iter().zip(&decisions).enumerate() {
            if !pend.is_empty() {
                let (accepted, rejected): (Vec<PlayerId>, Vec<PlayerId>) =
                    pend.iter().partition(|q| dec.accept.contains(q));
                self.log.push(Record::Stage2 { round, player: PlayerId(i), accepted, rejected });
            }
        }
        self.log.push(Record::Links { round, neighbors: next.adjacency() });
        cur.stage2 = Some(decisions);
        cur.network_after = Some(next.clone());
        self.network = next;
        self.phase = Phase::Stage3;
        Ok(&self.network)
    }

    /// Players who have at least one neighbor after link resolution.
    pub fn acting_players(&self) -> Vec<PlayerId> {
        (0..self.config.group_size)
            .map(PlayerId)
            .filter(|&p| self.network.degree(p) > 0)
            .collect()
    }

    /// Applies noise, scores every linked pair and closes the round's play.
    pub fn submit_stage3(&mut self, intended: Vec<Option<Action>>) -> Result<&RoundRecord, GameError> {
        self.expect_phase(Phase::Stage3)?;
        let n = self.config.group_size;
        if intended.len() != n {
            return Err(GameError::WrongArity { expected: n, got: intended.len() });
        }
        let degrees: Vec<usize> = (0..n).map(|p| self.network.degree(PlayerId(p))).collect();
        if let Some(p) = (0..n).find(|&p| degrees[p] > 0 && intended[p].is_none()) {
            return Err(GameError::MissingAction(PlayerId(p)));
        }
        let round = self.round;
        let actions: Vec<ActionRecord> = (0..n)
            .map(|p| {
                let want = if degrees[p] > 0 { intended[p] } else { None };
                apply_noise(want, self.config.noise_eps, &mut self.streams.noise)
            })
            .collect();
        let mut pair_points = Vec::with_capacity(self.network.len());
        for pair in self.network.links() {
            let a = actions[pair.lo().0].actual.expect("linked players act");
            let b = actions[pair.hi().0].actual.expect("linked players act");
            let (pa, pb) = payoff(&self.config.payoff, a, b);
            pair_points.push((pair, pa, pb));
        }
        let welfare = pair_points.iter().map(|(_, a, b)| a + b).sum();
        let cur = self.current.take().expect("round opened");
        let stage1 = cur.stage1.expect("stage 1 committed");
        let stage2 = cur.stage2.expect("stage 2 committed");
        let record = RoundRecord {
            round,
            removals: stage1.iter().map(|d| d.remove.iter().copied().collect()).collect(),
            proposals: stage1.iter().map(|d| d.propose.iter().copied().collect()).collect(),
            acceptances: cur
                .pending
                .iter()
                .zip(&stage2)
                .map(|(pend, d)| pend.iter().map(|&q| (q, d.accept.contains(&q))).collect())
                .collect(),
            opportunities: cur.opportunities,
            network_after_links: cur.network_after.expect("links resolved"),
            cooperation_rate: cooperation_rate(&actions, n),
            intended_cooperators: intended_cooperators(&actions, n),
            actions,
            pair_points,
            welfare,
        };
        for (i, a) in record.actions.iter().enumerate() {
            self.log.push(Record::Action {
                round,
                player: PlayerId(i),
                intended: a.intended,
                actual: a.actual,
                flipped: a.flipped,
            });
        }
        for &(pair, pa, pb) in &record.pair_points {
            self.log.push(Record::PairPayoff { round, pair, points: [pa, pb] });
        }
        let (mutual_cc, mutual_dd) = record.mutual_counts();
        self.log.push(Record::RoundSummary {
            round,
            cooperation_rate: record.cooperation_rate,
            intended_cooperators: record.intended_cooperators,
            welfare: record.welfare,
            mutual_cc,
            mutual_dd,
        });
        let actual: Vec<Option<Action>> = record.actions.iter().map(|a| a.actual).collect();
        self.histories.record(&actual);
        self.last_intended = record.actions.iter().map(|a| a.intended).collect();
        self.last_record = Some(record);
        self.phase = Phase::Outcome;
        Ok(self.last_record.as_ref().expect("just set"))
    }

    /// Runs the termination draw; moves to the next round or ends the session.
    pub fn conclude_round(&mut self) -> Result<bool, GameError> {
        self.expect_phase(Phase::Outcome)?;
        let (drawn, terminate) = should_terminate(self.round, &self.config, &mut self.streams.termination);
        self.log.push(Record::Termination { round: self.round, drawn, terminate });
        if terminate {
            self.phase = Phase::Ended;
        } else {
            self.round += 1;
            self.phase = Phase::Stage1;
        }
        Ok(terminate)
    }

    /// Runs one full round from a complete transcript, including the
    /// termination draw.
    pub fn play_round(&mut self, decisions: &RoundDecisions) -> Result<RoundRecord, GameError> {
        self.open_round()?;
        self.submit_stage1(decisions.stage1.clone())?;
        self.submit_stage2(decisions.stage2.clone())?;
        let record = self.submit_stage3(decisions.stage3.clone())?.clone();
        self.conclude_round()?;
        Ok(record)
    }

    /// Draws payment for every player and appends it to the log.
    pub fn settle(&mut self) -> Result<&[PlayerPayment], GameError> {
        self.expect_phase(Phase::Ended)?;
        if self.payments.is_none() {
            let payments = compute_payment(&self.log, &mut self.streams.payment)?;
            for p in &payments {
                self.log.push(p.to_record());
            }
            self.payments = Some(payments);
        }
        Ok(self.payments.as_deref().expect("just set"))
    }
}

/// Shuffles the first `k` slots of `items` into a uniform sample without
/// replacement and returns them.
pub(crate) fn partial_shuffle<T: Copy>(items: &mut [T], k: usize, rng: &mut impl Rng) -> Vec<T> {
    let k = k.min(items.len());
    for i in 0..k {
        let j = rng.random_range(i..items.len());
        items.swap(i, j);
    }
    items[..k].to_vec()
}
