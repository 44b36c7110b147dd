//! Bot strategies that decide from a participant's local view only.
//!
//! A bot sees what a lab participant saw on screen: its own history, every
//! other player's displayed five-action history, its current neighbors, last
//! round's outcome table and the prompt of the active stage. It never sees
//! the network beyond its own links nor anyone else's intended action.

mod presets;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, HistoryWindow, PlayerId, Session, Stage1Decision, Stage1Prompt, Stage2Decision};

pub use presets::{preset, Preset, SeatSpec, StrategyPack};

/// Number of most recent actual actions a bucket looks at.
pub const BUCKET_SPAN: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("bad seat spec `{0}`: expected NAME or NAME:C / NAME:D")]
    BadSeat(String),
    #[error("strategy pack `{name}` is invalid: {reason}")]
    BadPack { name: String, reason: String },
}

/// Cooperation level of a five-round actual-action window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryBucket {
    Low,
    Medium,
    High,
    Unrated,
}

impl HistoryBucket {
    pub const RATED: [HistoryBucket; 3] = [HistoryBucket::Low, HistoryBucket::Medium, HistoryBucket::High];

    pub fn as_str(self) -> &'static str {
        match self {
            HistoryBucket::Low => "low",
            HistoryBucket::Medium => "medium",
            HistoryBucket::High => "high",
            HistoryBucket::Unrated => "unrated",
        }
    }
}

/// Low: at most one C in the last five; Medium: two or three; High: four or
/// five. Fewer than five recorded rounds is Unrated. NoAction is non-C.
pub fn bucket(history: &HistoryWindow) -> HistoryBucket {
    if history.len() < BUCKET_SPAN {
        return HistoryBucket::Unrated;
    }
    match history.iter().take(BUCKET_SPAN).filter(|s| *s == Some(Action::C)).count() {
        0 | 1 => HistoryBucket::Low,
        2 | 3 => HistoryBucket::Medium,
        _ => HistoryBucket::High,
    }
}

/// One probability per history bucket. Unrated falls back to Medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketProbs {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unrated: Option<f64>,
}

impl BucketProbs {
    pub const fn uniform(p: f64) -> Self {
        Self { low: p, medium: p, high: p, unrated: None }
    }

    pub fn get(&self, b: HistoryBucket) -> f64 {
        match b {
            HistoryBucket::Low => self.low,
            HistoryBucket::Medium => self.medium,
            HistoryBucket::High => self.high,
            HistoryBucket::Unrated => self.unrated.unwrap_or(self.medium),
        }
    }

    fn all(&self) -> impl Iterator<Item = f64> {
        [self.low, self.medium, self.high].into_iter().chain(self.unrated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub remove_prob: BucketProbs,
    pub propose_prob: BucketProbs,
    pub accept_prob: BucketProbs,
    /// Log-odds of intending D when no neighbor defected last round.
    pub action_intercept: f64,
    /// Change in log-odds of D per unit fraction of defecting neighbors.
    pub action_slope: f64,
    /// Extra chance of intending D while one's own history is High.
    pub opportunism_prob: f64,
    pub initial_action: Action,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), String> {
        let probs = self
            .remove_prob
            .all()
            .chain(self.propose_prob.all())
            .chain(self.accept_prob.all())
            .chain([self.opportunism_prob]);
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.action_intercept.is_nan() || self.action_slope.is_nan() {
            return Err("reaction coefficients must be numbers".into());
        }
        Ok(())
    }

    /// Probability of intending D before the opportunism override.
    pub fn reaction(&self, defecting_fraction: f64) -> f64 {
        logistic(self.action_intercept + self.action_slope * defecting_fraction)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything a participant can see when asked for a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub me: PlayerId,
    pub round: u32,
    pub own_history: HistoryWindow,
    pub own_last_intended: Option<Action>,
    /// Displayed actual-action history of every other player.
    pub histories: BTreeMap<PlayerId, HistoryWindow>,
    /// Current neighbors.
    pub neighbors: Vec<PlayerId>,
    /// Last round's neighbors and the actual actions they played.
    pub last_outcome: Vec<(PlayerId, Option<Action>)>,
    pub stage1: Stage1Prompt,
    pub proposers: Vec<PlayerId>,
}

impl LocalView {
    /// The view of `me` at the session's current stage.
    pub fn of(session: &Session, me: PlayerId) -> Self {
        let n = session.config().group_size;
        let last_outcome = session
            .last_record()
            .map(|r| {
                r.network_after_links
                    .neighbors(me)
                    .into_iter()
                    .map(|q| (q, r.actions[q.0].actual))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            me,
            round: session.round(),
            own_history: session.history(me).clone(),
            own_last_intended: session.last_intended(me),
            histories: (0..n)
                .filter(|&q| q != me.0)
                .map(|q| (PlayerId(q), session.history(PlayerId(q)).clone()))
                .collect(),
            neighbors: session.network().neighbors(me),
            last_outcome,
            stage1: session.stage1_prompt(me).cloned().unwrap_or_default(),
            proposers: session.pending_proposers(me).to_vec(),
        }
    }

    pub fn bucket_of(&self, q: PlayerId) -> HistoryBucket {
        self.histories.get(&q).map(bucket).unwrap_or(HistoryBucket::Unrated)
    }

    /// Share of last round's neighbors whose actual action was D. NoAction
    /// entries are left out; 0 when nobody is rated.
    pub fn defecting_fraction(&self) -> f64 {
        let rated: Vec<Action> = self.last_outcome.iter().filter_map(|(_, a)| *a).collect();
        if rated.is_empty() {
            return 0.0;
        }
        rated.iter().filter(|a| **a == Action::D).count() as f64 / rated.len() as f64
    }
}

fn draw(rng: &mut impl Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Removal ticks then proposal ticks, one draw per prompted counterpart in
/// increasing id order.
pub fn decide_stage1(params: &StrategyParams, view: &LocalView, rng: &mut impl Rng) -> Stage1Decision {
    let mut out = Stage1Decision::default();
    for &q in &view.stage1.removable {
        if draw(rng, params.remove_prob.get(view.bucket_of(q))) {
            out.remove.insert(q);
        }
    }
    for &q in &view.stage1.proposable {
        if draw(rng, params.propose_prob.get(view.bucket_of(q))) {
            out.propose.insert(q);
        }
    }
    out
}

pub fn decide_stage2(params: &StrategyParams, view: &LocalView, rng: &mut impl Rng) -> Stage2Decision {
    Stage2Decision {
        accept: view
            .proposers
            .iter()
            .copied()
            .filter(|&q| draw(rng, params.accept_prob.get(view.bucket_of(q))))
            .collect(),
    }
}

/// Round 1 plays `initial_action` without drawing. Later rounds draw twice:
/// once for the reaction function and once for the opportunism override.
pub fn decide_action(params: &StrategyParams, view: &LocalView, rng: &mut impl Rng) -> Action {
    if view.round <= 1 {
        return params.initial_action;
    }
    let react = draw(rng, params.reaction(view.defecting_fraction()));
    let opportunist = draw(rng, params.opportunism_prob) && bucket(&view.own_history) == HistoryBucket::High;
    if react || opportunist {
        Action::D
    } else {
        Action::C
    }
}

/// Anything that can fill a seat: answers each stage from a local view.
pub trait Agent: Send {
    fn stage1(&mut self, view: &LocalView) -> Stage1Decision;
    fn stage2(&mut self, view: &LocalView) -> Stage2Decision;
    fn action(&mut self, view: &LocalView) -> Action;
}

/// A strategy bound to its own random stream.
#[derive(Debug, Clone)]
pub struct Bot<R> {
    pub params: StrategyParams,
    rng: R,
}

impl<R: Rng> Bot<R> {
    pub fn new(params: StrategyParams, rng: R) -> Self {
        Self { params, rng }
    }
}

impl Bot<rand_chacha::ChaCha8Rng> {
    /// The bot for `seat` of the session seeded with `session_seed`.
    pub fn for_seat(params: StrategyParams, session_seed: u64, seat: usize) -> Self {
        Self::new(params, crate::rng::stream(session_seed, &crate::rng::seat_label(seat)))
    }
}

impl<R: Rng + Send> Agent for Bot<R> {
    fn stage1(&mut self, view: &LocalView) -> Stage1Decision {
        decide_stage1(&self.params, view, &mut self.rng)
    }

    fn stage2(&mut self, view: &LocalView) -> Stage2Decision {
        decide_stage2(&self.params, view, &mut self.rng)
    }

    fn action(&mut self, view: &LocalView) -> Action {
        decide_action(&self.params, view, &mut self.rng)
    }
}
