//! Wire messages. Every frame is one JSON object with a `type` tag and the
//! protocol version `v`. Counterparts are named by seat label, never by
//! seat index or join token.

use std::collections::BTreeMap;

use repnet_core::game::{Action, PayoffMatrix};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

pub type Label = String;

/// Displayed actual actions, most recent first; `null` is a round without neighbors.
pub type History = Vec<Option<Action>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Welcome {
        session: String,
        you: Label,
        labels: Vec<Label>,
        pairs_per_round: usize,
        noise_eps: f64,
        payoff: PayoffMatrix,
    },
    /// Progress, counted over human seats only. In the lobby `stage` is
    /// absent and `answered` counts joined participants.
    RosterUpdate {
        round: u32,
        stage: Option<u8>,
        answered: usize,
        expected: usize,
    },
    Stage1Prompt {
        round: u32,
        /// Milliseconds since session start; absent when stages are untimed.
        deadline_ms: Option<u64>,
        /// False when the prompt has nothing to decide.
        awaiting_response: bool,
        removable: Vec<Label>,
        proposable: Vec<Label>,
        own_history: History,
        neighbors: Vec<Label>,
        /// Every other player's displayed history, neighbors included.
        histories: BTreeMap<Label, History>,
    },
    Stage2Prompt {
        round: u32,
        deadline_ms: Option<u64>,
        awaiting_response: bool,
        proposers: Vec<Label>,
    },
    Stage3Prompt {
        round: u32,
        deadline_ms: Option<u64>,
        awaiting_response: bool,
        neighbors: Vec<Label>,
        own_history: History,
        histories: BTreeMap<Label, History>,
    },
    RoundOutcome {
        round: u32,
        intended: Option<Action>,
        actual: Option<Action>,
        /// Set when the implemented action differs from the chosen one.
        flipped: bool,
        neighbors: Vec<NeighborOutcome>,
        points: i64,
    },
    SessionEnd {
        rounds_played: u32,
        payment: PaymentSummary,
    },
    Error {
        message: String,
    },
    Pong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborOutcome {
    pub label: Label,
    pub actual: Action,
    pub points: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentSummary {
    pub rounds: Vec<u32>,
    /// Partners drawn in each paid round. A partner who was not a neighbor
    /// that round contributed 0.
    pub partners: Vec<Vec<Label>>,
    pub points: i64,
    pub ecu: i64,
    pub sgd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Join { token: String },
    Stage1Decision { round: u32, #[serde(default)] remove: Vec<Label>, #[serde(default)] propose: Vec<Label> },
    Stage2Decision { round: u32, #[serde(default)] accept: Vec<Label> },
    Stage3Action { round: u32, action: Action },
    Ping,
}

#[derive(Serialize)]
struct OutFrame<'a> {
    v: u32,
    #[serde(flatten)]
    msg: &'a ServerMessage,
}

#[derive(Deserialize)]
struct InFrame<T> {
    #[serde(default)]
    v: Option<u32>,
    #[serde(flatten)]
    msg: T,
}

pub fn encode(msg: &ServerMessage) -> String {
    serde_json::to_string(&OutFrame { v: PROTOCOL_VERSION, msg }).expect("server messages serialize")
}

/// Parses a client frame. A missing `v` is read as the current version.
pub fn decode_client(text: &str) -> Result<ClientMessage, String> {
    let frame: InFrame<ClientMessage> = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
    match frame.v {
        Some(v) if v != PROTOCOL_VERSION => Err(format!("protocol version {v} not supported (expected {PROTOCOL_VERSION})")),
        _ => Ok(frame.msg),
    }
}

/// Parses a server frame, for clients and tests.
pub fn decode_server(text: &str) -> Result<ServerMessage, String> {
    let frame: InFrame<ServerMessage> = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
    match frame.v {
        Some(PROTOCOL_VERSION) => Ok(frame.msg),
        other => Err(format!("unexpected protocol version {other:?}")),
    }
}

pub fn encode_client(msg: &ClientMessage) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        v: u32,
        #[serde(flatten)]
        msg: &'a ClientMessage,
    }
    serde_json::to_string(&Out { v: PROTOCOL_VERSION, msg }).expect("client messages serialize")
}
