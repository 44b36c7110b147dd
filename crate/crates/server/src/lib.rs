//! Live sessions mixing human participants and bots.
//!
//! [`LiveSession`] is the whole protocol as a plain state machine; the
//! [`transport`] module puts it behind WebSocket connections, one task and
//! one command queue per session.

pub mod config;
pub mod live;
pub mod protocol;
pub mod transport;

use std::path::PathBuf;

use repnet_core::game::GameError;
use repnet_core::log::LogError;
use thiserror::Error;

pub use config::{Seat, SessionConfig, SessionFile, StageTimeouts, TimeoutPolicy};
pub use live::LiveSession;
pub use protocol::{ClientMessage, ServerMessage};
pub use transport::{router, Created, Registry};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("bad session config: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("unknown join token")]
    UnknownToken,
    #[error("session {0} already exists")]
    DuplicateSession(String),
    #[error("no session {0}")]
    UnknownSession(String),
    #[error("session {0} is over")]
    SessionClosed(String),
    #[error("cannot write {path}: {source}")]
    Log { path: PathBuf, source: LogError },
}
