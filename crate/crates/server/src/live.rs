//! The session state machine, free of I/O. The caller feeds it joins,
//! client messages, disconnects and clock ticks (milliseconds since the
//! session was created) and drains the messages it wants delivered.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use repnet_core::agents::{Agent, Bot, LocalView};
use repnet_core::game::{
    Action, GameError, HistoryWindow, Pair, PlayerId, RoundRecord, Session, Stage1Decision, Stage2Decision,
};
use repnet_core::log::EventLog;
use repnet_core::rng;

use crate::config::{Seat, SessionConfig, TimeoutPolicy};
use crate::protocol::{ClientMessage, History, Label, NeighborOutcome, PaymentSummary, ServerMessage};
use crate::ServerError;

/// Seat labels: A..Z, then A2..Z2 and so on for larger groups.
pub fn label_for(i: usize) -> Label {
    let letter = (b'A' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        k => format!("{letter}{}", k + 1),
    }
}

fn history(h: &HistoryWindow) -> History {
    h.iter().collect()
}

#[derive(Debug)]
struct Collect {
    stage: u8,
    deadline: Option<u64>,
    expected: usize,
    /// Human seats whose answer is still outstanding.
    waiting: BTreeSet<usize>,
    stage1: Vec<Stage1Decision>,
    stage2: Vec<Stage2Decision>,
    stage3: Vec<Option<Action>>,
}

#[derive(Debug)]
enum State {
    Lobby,
    Collecting(Collect),
    Ended,
}

pub struct LiveSession {
    cfg: SessionConfig,
    session: Session,
    labels: Vec<Label>,
    by_label: HashMap<Label, PlayerId>,
    tokens: Vec<Option<String>>,
    bots: Vec<Option<Bot<ChaCha8Rng>>>,
    /// Stand-ins for human seats under the fallback-bot policy.
    fallback: Vec<Option<Bot<ChaCha8Rng>>>,
    joined: Vec<bool>,
    connected: Vec<bool>,
    /// Last prompt sent to each human, replayed on rejoin.
    prompt: Vec<Option<ServerMessage>>,
    ending: Option<Vec<PaymentSummary>>,
    state: State,
    outbox: Vec<(usize, ServerMessage)>,
}

impl LiveSession {
    /// Sets up seats, labels and tokens. Human seats without a configured
    /// token get a random one. An all-bot session plays to the end here.
    pub fn new(cfg: SessionConfig, now_ms: u64) -> Result<Self, ServerError> {
        cfg.validate()?;
        let n = cfg.config.group_size;
        let session = Session::with_header(cfg.config.clone(), cfg.seed, cfg.treatment.clone(), cfg.roster_names())?;
        let mut labels: Vec<Label> = (0..n).map(label_for).collect();
        labels.shuffle(&mut rng::stream(cfg.seed, "labels"));
        let by_label = labels.iter().enumerate().map(|(i, l)| (l.clone(), PlayerId(i))).collect();
        let mut thread_rng = rand::rng();
        let mut tokens = Vec::with_capacity(n);
        let mut bots = Vec::with_capacity(n);
        let mut fallback = Vec::with_capacity(n);
        for (i, seat) in cfg.seats.iter().enumerate() {
            match seat {
                Seat::Human { token } => {
                    let t = token.clone().unwrap_or_else(|| format!("{:016x}", thread_rng.random::<u64>()));
                    tokens.push(Some(t));
                    bots.push(None);
                    fallback.push(match &cfg.timeout_policy {
                        TimeoutPolicy::FallbackBot(spec) => Some(Bot::for_seat(spec.params.clone(), cfg.seed, i)),
                        TimeoutPolicy::DefaultAction => None,
                    });
                }
                Seat::Bot(spec) => {
                    tokens.push(None);
                    bots.push(Some(Bot::for_seat(spec.params.clone(), cfg.seed, i)));
                    fallback.push(None);
                }
            }
        }
        let mut live = Self {
            cfg,
            session,
            labels,
            by_label,
            tokens,
            bots,
            fallback,
            joined: vec![false; n],
            connected: vec![false; n],
            prompt: vec![None; n],
            ending: None,
            state: State::Lobby,
            outbox: Vec::new(),
        };
        live.advance(now_ms)?;
        Ok(live)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    /// Join tokens by seat; `None` for bot seats.
    pub fn tokens(&self) -> &[Option<String>] {
        &self.tokens
    }

    pub fn label(&self, seat: usize) -> &str {
        &self.labels[seat]
    }

    pub fn is_ended(&self) -> bool {
        matches!(self.state, State::Ended)
    }

    pub fn log(&self) -> &EventLog {
        self.session.log()
    }

    pub fn into_log(self) -> EventLog {
        self.session.into_log()
    }

    /// Current stage deadline, if one is running.
    pub fn deadline(&self) -> Option<u64> {
        match &self.state {
            State::Collecting(c) => c.deadline,
            _ => None,
        }
    }

    pub fn drain_outbox(&mut self) -> Vec<(usize, ServerMessage)> {
        std::mem::take(&mut self.outbox)
    }

    fn humans(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(|&i| self.tokens[i].is_some())
    }

    /// Binds a connection to the seat holding `token`. A second join with
    /// the same token takes the seat over. The seat gets a welcome followed
    /// by whatever it would currently be looking at.
    pub fn join(&mut self, token: &str, now_ms: u64) -> Result<usize, ServerError> {
        let seat = self
            .tokens
            .iter()
            .position(|t| t.as_deref() == Some(token))
            .ok_or(ServerError::UnknownToken)?;
        self.joined[seat] = true;
        self.connected[seat] = true;
        let mut labels = self.labels.clone();
        labels.sort();
        self.outbox.push((
            seat,
            ServerMessage::Welcome {
                session: self.cfg.session_id.clone(),
                you: self.labels[seat].clone(),
                labels,
                pairs_per_round: self.cfg.config.pairs_per_round,
                noise_eps: self.cfg.config.noise_eps,
                payoff: self.cfg.config.payoff,
            },
        ));
        match &self.state {
            State::Lobby => self.broadcast_progress(),
            State::Collecting(c) => {
                let waiting = c.waiting.contains(&seat);
                if let Some(mut p) = self.prompt[seat].clone() {
                    set_awaiting(&mut p, waiting);
                    self.outbox.push((seat, p));
                }
            }
            State::Ended => {
                let end = self.end_message(seat);
                self.outbox.push((seat, end));
            }
        }
        self.advance(now_ms)?;
        Ok(seat)
    }

    /// The seat's connection went away. Its pending answers are resolved by
    /// the timeout policy: at the deadline when stages are timed, at once
    /// when they are not.
    pub fn disconnect(&mut self, seat: usize, now_ms: u64) -> Result<(), ServerError> {
        if seat >= self.connected.len() {
            return Ok(());
        }
        self.connected[seat] = false;
        if self.cfg.stage_timeouts.is_none() {
            if let State::Collecting(c) = &self.state {
                if c.waiting.contains(&seat) {
                    self.time_out(&[seat]);
                }
            }
        }
        self.advance(now_ms)
    }

    /// Resolves every outstanding answer whose deadline has passed.
    pub fn tick(&mut self, now_ms: u64) -> Result<(), ServerError> {
        if let State::Collecting(c) = &self.state {
            if c.deadline.is_some_and(|d| now_ms >= d) {
                let late: Vec<usize> = c.waiting.iter().copied().collect();
                self.time_out(&late);
            }
        }
        self.advance(now_ms)
    }

    /// Handles one message from a joined seat. Invalid decisions are
    /// answered with an error and leave the seat's prompt open.
    pub fn handle(&mut self, seat: usize, msg: ClientMessage, now_ms: u64) -> Result<(), ServerError> {
        let outcome = match msg {
            ClientMessage::Ping => {
                self.outbox.push((seat, ServerMessage::Pong));
                return Ok(());
            }
            ClientMessage::Join { .. } => Err("already joined".to_string()),
            ClientMessage::Stage1Decision { round, remove, propose } => self.accept_stage1(seat, round, &remove, &propose),
            ClientMessage::Stage2Decision { round, accept } => self.accept_stage2(seat, round, &accept),
            ClientMessage::Stage3Action { round, action } => self.accept_stage3(seat, round, action),
        };
        match outcome {
            Ok(()) => {
                self.broadcast_progress();
                self.advance(now_ms)
            }
            Err(message) => {
                self.outbox.push((seat, ServerMessage::Error { message }));
                Ok(())
            }
        }
    }

    fn open_for(&mut self, seat: usize, round: u32, stage: u8) -> Result<&mut Collect, String> {
        let current = self.session.round();
        match &mut self.state {
            State::Collecting(c) if c.stage == stage && round == current && c.waiting.contains(&seat) => Ok(c),
            _ => Err(format!("no stage {stage} decision is expected from you for round {round}")),
        }
    }

    fn resolve_labels(&self, labels: &[Label], allowed: &[PlayerId], what: &str) -> Result<BTreeSet<PlayerId>, String> {
        labels
            .iter()
            .map(|l| match self.by_label.get(l) {
                Some(p) if allowed.contains(p) => Ok(*p),
                _ => Err(format!("{l} is not {what}")),
            })
            .collect()
    }

    fn accept_stage1(&mut self, seat: usize, round: u32, remove: &[Label], propose: &[Label]) -> Result<(), String> {
        self.open_for(seat, round, 1)?;
        let prompt = self.session.stage1_prompt(PlayerId(seat)).cloned().unwrap_or_default();
        let decision = Stage1Decision {
            remove: self.resolve_labels(remove, &prompt.removable, "removable")?,
            propose: self.resolve_labels(propose, &prompt.proposable, "proposable")?,
        };
        let c = self.open_for(seat, round, 1)?;
        c.stage1[seat] = decision;
        c.waiting.remove(&seat);
        Ok(())
    }

    fn accept_stage2(&mut self, seat: usize, round: u32, accept: &[Label]) -> Result<(), String> {
        self.open_for(seat, round, 2)?;
        let proposers = self.session.pending_proposers(PlayerId(seat)).to_vec();
        let decision = Stage2Decision { accept: self.resolve_labels(accept, &proposers, "proposing to you")? };
        let c = self.open_for(seat, round, 2)?;
        c.stage2[seat] = decision;
        c.waiting.remove(&seat);
        Ok(())
    }

    fn accept_stage3(&mut self, seat: usize, round: u32, action: Action) -> Result<(), String> {
        let c = self.open_for(seat, round, 3)?;
        c.stage3[seat] = Some(action);
        c.waiting.remove(&seat);
        Ok(())
    }

    /// Fills in answers for `seats` per the timeout policy.
    fn time_out(&mut self, seats: &[usize]) {
        let State::Collecting(c) = &mut self.state else { return };
        for &seat in seats {
            if !c.waiting.remove(&seat) {
                continue;
            }
            let me = PlayerId(seat);
            match self.fallback[seat].as_mut() {
                Some(bot) => {
                    let view = LocalView::of(&self.session, me);
                    match c.stage {
                        1 => c.stage1[seat] = bot.stage1(&view),
                        2 => c.stage2[seat] = bot.stage2(&view),
                        _ => c.stage3[seat] = Some(bot.action(&view)),
                    }
                }
                None => match c.stage {
                    1 => c.stage1[seat] = Stage1Decision::default(),
                    2 => c.stage2[seat] = Stage2Decision::default(),
                    _ => c.stage3[seat] = Some(self.session.last_intended(me).unwrap_or(Action::D)),
                },
            }
        }
    }

    /// Moves the protocol forward as far as the collected answers allow.
    fn advance(&mut self, now_ms: u64) -> Result<(), ServerError> {
        loop {
            match &self.state {
                State::Lobby => {
                    if !self.humans().all(|i| self.joined[i]) {
                        return Ok(());
                    }
                    self.begin_stage1(now_ms)?;
                }
                State::Collecting(c) if c.waiting.is_empty() => {
                    let State::Collecting(c) = std::mem::replace(&mut self.state, State::Lobby) else { unreachable!() };
                    match c.stage {
                        1 => {
                            self.session.submit_stage1(c.stage1)?;
                            self.begin_stage2(now_ms);
                        }
                        2 => {
                            self.session.submit_stage2(c.stage2)?;
                            self.begin_stage3(now_ms);
                        }
                        _ => {
                            let record = self.session.submit_stage3(c.stage3)?.clone();
                            self.send_outcomes(&record);
                            if self.session.conclude_round()? {
                                self.finish()?;
                            } else {
                                self.begin_stage1(now_ms)?;
                            }
                        }
                    }
                }
                State::Collecting(_) | State::Ended => return Ok(()),
            }
        }
    }

    fn stage_deadline(&self, stage: u8, now_ms: u64) -> Option<u64> {
        self.cfg.stage_timeouts.map(|t| now_ms + t.millis(stage))
    }

    fn start_collect(&mut self, stage: u8, now_ms: u64, awaited: BTreeSet<usize>) -> Collect {
        let n = self.cfg.config.group_size;
        Collect {
            stage,
            deadline: self.stage_deadline(stage, now_ms),
            expected: awaited.len(),
            waiting: awaited,
            stage1: vec![Stage1Decision::default(); n],
            stage2: vec![Stage2Decision::default(); n],
            stage3: vec![None; n],
        }
    }

    /// Installs the stage, times out absent seats of untimed sessions and
    /// announces progress.
    fn install(&mut self, c: Collect) {
        self.state = State::Collecting(c);
        if self.cfg.stage_timeouts.is_none() {
            let absent: Vec<usize> = self.humans().filter(|&i| !self.connected[i]).collect();
            self.time_out(&absent);
        }
        self.broadcast_progress();
    }

    fn views(&self) -> Vec<LocalView> {
        (0..self.cfg.config.group_size).map(|p| LocalView::of(&self.session, PlayerId(p))).collect()
    }

    fn begin_stage1(&mut self, now_ms: u64) -> Result<(), GameError> {
        self.session.open_round()?;
        let views = self.views();
        let awaited = self.humans().filter(|&i| !views[i].stage1.is_empty()).collect();
        let mut c = self.start_collect(1, now_ms, awaited);
        for (i, v) in views.iter().enumerate() {
            if let Some(bot) = self.bots[i].as_mut() {
                c.stage1[i] = bot.stage1(v);
            }
        }
        let humans: Vec<usize> = self.humans().collect();
        for i in humans {
            let v = &views[i];
            let msg = ServerMessage::Stage1Prompt {
                round: v.round,
                deadline_ms: c.deadline,
                awaiting_response: c.waiting.contains(&i),
                removable: self.names(&v.stage1.removable),
                proposable: self.names(&v.stage1.proposable),
                own_history: history(&v.own_history),
                neighbors: self.names(&v.neighbors),
                histories: self.histories(v),
            };
            self.send_prompt(i, msg);
        }
        self.install(c);
        Ok(())
    }

    fn begin_stage2(&mut self, now_ms: u64) {
        let views = self.views();
        let awaited = self.humans().filter(|&i| !views[i].proposers.is_empty()).collect();
        let mut c = self.start_collect(2, now_ms, awaited);
        for (i, v) in views.iter().enumerate() {
            if let Some(bot) = self.bots[i].as_mut() {
                c.stage2[i] = bot.stage2(v);
            }
        }
        let humans: Vec<usize> = self.humans().collect();
        for i in humans {
            let v = &views[i];
            let msg = ServerMessage::Stage2Prompt {
                round: v.round,
                deadline_ms: c.deadline,
                awaiting_response: c.waiting.contains(&i),
                proposers: self.names(&v.proposers),
            };
            self.send_prompt(i, msg);
        }
        self.install(c);
    }

    fn begin_stage3(&mut self, now_ms: u64) {
        let acting: BTreeSet<usize> = self.session.acting_players().into_iter().map(|p| p.0).collect();
        let awaited = self.humans().filter(|i| acting.contains(i)).collect();
        let mut c = self.start_collect(3, now_ms, awaited);
        // Only linked players are asked, exactly as in the headless runner.
        for &i in &acting {
            if let Some(bot) = self.bots[i].as_mut() {
                c.stage3[i] = Some(bot.action(&LocalView::of(&self.session, PlayerId(i))));
            }
        }
        let humans: Vec<usize> = self.humans().collect();
        for i in humans {
            let v = LocalView::of(&self.session, PlayerId(i));
            let msg = ServerMessage::Stage3Prompt {
                round: v.round,
                deadline_ms: c.deadline,
                awaiting_response: c.waiting.contains(&i),
                neighbors: self.names(&v.neighbors),
                own_history: history(&v.own_history),
                histories: self.histories(&v),
            };
            self.send_prompt(i, msg);
        }
        self.install(c);
    }

    fn send_outcomes(&mut self, record: &RoundRecord) {
        let points: BTreeMap<Pair, (i64, i64)> = record.pair_points.iter().map(|&(p, a, b)| (p, (a, b))).collect();
        let humans: Vec<usize> = self.humans().collect();
        for i in humans {
            let me = PlayerId(i);
            let own = record.actions[i];
            let neighbors: Vec<NeighborOutcome> = record
                .network_after_links
                .neighbors(me)
                .into_iter()
                .map(|q| {
                    let pair = Pair::new(me, q).expect("distinct players");
                    let (lo, hi) = points[&pair];
                    NeighborOutcome {
                        label: self.labels[q.0].clone(),
                        actual: record.actions[q.0].actual.expect("linked players act"),
                        points: if pair.lo() == me { lo } else { hi },
                    }
                })
                .collect();
            let msg = ServerMessage::RoundOutcome {
                round: record.round,
                intended: own.intended,
                actual: own.actual,
                flipped: own.flipped,
                points: neighbors.iter().map(|n| n.points).sum(),
                neighbors,
            };
            self.outbox.push((i, msg));
        }
    }

    fn finish(&mut self) -> Result<(), GameError> {
        let payments = self.session.settle()?.to_vec();
        let summaries = payments
            .iter()
            .map(|p| PaymentSummary {
                rounds: p.rounds.clone(),
                partners: p.partners.iter().map(|ps| self.names(ps)).collect(),
                points: p.points,
                ecu: p.ecu,
                sgd: p.sgd,
            })
            .collect();
        self.ending = Some(summaries);
        self.state = State::Ended;
        let humans: Vec<usize> = self.humans().collect();
        for i in humans {
            let end = self.end_message(i);
            self.outbox.push((i, end));
        }
        Ok(())
    }

    fn end_message(&self, seat: usize) -> ServerMessage {
        ServerMessage::SessionEnd {
            rounds_played: self.session.log().rounds_played(),
            payment: self.ending.as_ref().expect("session settled")[seat].clone(),
        }
    }

    fn send_prompt(&mut self, seat: usize, msg: ServerMessage) {
        self.prompt[seat] = Some(msg.clone());
        self.outbox.push((seat, msg));
    }

    fn broadcast_progress(&mut self) {
        let (stage, answered, expected) = match &self.state {
            State::Lobby => {
                let humans: Vec<usize> = self.humans().collect();
                (None, humans.iter().filter(|&&i| self.joined[i]).count(), humans.len())
            }
            State::Collecting(c) => (Some(c.stage), c.expected - c.waiting.len(), c.expected),
            State::Ended => return,
        };
        let round = self.session.round();
        let humans: Vec<usize> = self.humans().filter(|&i| self.connected[i]).collect();
        for i in humans {
            self.outbox.push((i, ServerMessage::RosterUpdate { round, stage, answered, expected }));
        }
    }

    fn names(&self, players: &[PlayerId]) -> Vec<Label> {
        players.iter().map(|p| self.labels[p.0].clone()).collect()
    }

    fn histories(&self, v: &LocalView) -> BTreeMap<Label, History> {
        v.histories.iter().map(|(q, h)| (self.labels[q.0].clone(), history(h))).collect()
    }
}

fn set_awaiting(msg: &mut ServerMessage, value: bool) {
    match msg {
        ServerMessage::Stage1Prompt { awaiting_response, .. }
        | ServerMessage::Stage2Prompt { awaiting_response, .. }
        | ServerMessage::Stage3Prompt { awaiting_response, .. } => *awaiting_response = value,
        _ => {}
    }
}
