//! Headless sessions: bots in every seat, driven stage by stage through the
//! game engine exactly as the live server drives it.

mod batch;
mod validate;

use thiserror::Error;

use crate::agents::{Agent, AgentError, Bot, LocalView, SeatSpec};
use crate::game::{GameError, PlayerId, Session, TreatmentConfig};
use crate::log::EventLog;

pub use batch::{expand_roster, log_name, run_batch, session_seed, BatchSpec, ConfigOverrides, TreatmentEntry};
pub use validate::{transcript, validate_file, validate_log, Check, ValidationError, ValidationReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("seat {seat} returned a malformed decision: {source}")]
    MalformedDecision { seat: usize, source: GameError },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("bad batch spec: {0}")]
    Spec(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn blame(e: GameError) -> SimError {
    match e {
        GameError::ProtocolViolation { player, .. } | GameError::MissingAction(player) => {
            SimError::MalformedDecision { seat: player.0, source: e }
        }
        other => SimError::Game(other),
    }
}

/// Plays one session with a bot per seat. Seat `i` draws from the stream
/// labelled `agent/i` of `seed`.
pub fn run_session(config: &TreatmentConfig, treatment: &str, roster: &[SeatSpec], seed: u64) -> Result<EventLog, SimError> {
    let agents: Vec<Box<dyn Agent>> = roster
        .iter()
        .enumerate()
        .map(|(i, s)| Box::new(Bot::for_seat(s.params.clone(), seed, i)) as Box<dyn Agent>)
        .collect();
    let names = roster.iter().map(|s| s.name.clone()).collect();
    run_with_agents(config, treatment, names, agents, seed)
}

/// Plays one session with arbitrary agents, one per seat.
pub fn run_with_agents(
    config: &TreatmentConfig,
    treatment: &str,
    names: Vec<String>,
    mut agents: Vec<Box<dyn Agent>>,
    seed: u64,
) -> Result<EventLog, SimError> {
    let mut session = Session::with_header(config.clone(), seed, treatment.to_string(), names)?;
    let n = config.group_size;
    while !session.is_ended() {
        session.open_round()?;
        let views: Vec<LocalView> = (0..n).map(|p| LocalView::of(&session, PlayerId(p))).collect();
        let s1 = agents.iter_mut().zip(&views).map(|(a, v)| a.stage1(v)).collect();
        session.submit_stage1(s1).map_err(blame)?;

        let views: Vec<LocalView> = (0..n).map(|p| LocalView::of(&session, PlayerId(p))).collect();
        let s2 = agents.iter_mut().zip(&views).map(|(a, v)| a.stage2(v)).collect();
        session.submit_stage2(s2).map_err(blame)?;

        // Only linked players are asked: an isolated player has nothing to play.
        let mut s3 = vec![None; n];
        for p in session.acting_players() {
            let view = LocalView::of(&session, p);
            s3[p.0] = Some(agents[p.0].action(&view));
        }
        session.submit_stage3(s3).map_err(blame)?;
        session.conclude_round()?;
    }
    session.settle()?;
    Ok(session.into_log())
}
