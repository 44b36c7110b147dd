//! Event log: the newline-delimited record of one session.
//!
//! The first line is the header; every following line is one record tagged
//! by `kind`. Records within a round appear in protocol order:
//! `opportunities`, `stage1`*, `stage2`*, `links`, `action`*, `pair_payoff`*,
//! `round_summary`, `termination`. `payment` records close the log.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, Pair, PairOpportunity, PlayerId, TreatmentConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("log is empty")]
    Empty,
    #[error("first line is not a header")]
    MissingHeader,
    #[error("unexpected header on line {0}")]
    DuplicateHeader(usize),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub treatment: String,
    pub config: TreatmentConfig,
    /// Strategy name per seat; `human` for live participants.
    pub roster: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Opportunities {
        round: u32,
        pairs: Vec<PairOpportunity>,
    },
    /// One per player named in at least one sampled pair.
    Stage1 {
        round: u32,
        player: PlayerId,
        remove: Vec<PlayerId>,
        propose: Vec<PlayerId>,
    },
    /// One per player holding at least one one-sided proposal.
    Stage2 {
        round: u32,
        player: PlayerId,
        accepted: Vec<PlayerId>,
        rejected: Vec<PlayerId>,
    },
    /// Network after link resolution, as adjacency lists.
    Links {
        round: u32,
        neighbors: Vec<Vec<usize>>,
    },
    Action {
        round: u32,
        player: PlayerId,
        intended: Option<Action>,
        actual: Option<Action>,
        flipped: bool,
    },
    PairPayoff {
        round: u32,
        pair: Pair,
        points: [i64; 2],
    },
    RoundSummary {
        round: u32,
        cooperation_rate: f64,
        intended_cooperators: f64,
        welfare: i64,
        mutual_cc: usize,
        mutual_dd: usize,
    },
    Termination {
        round: u32,
        /// False while the minimum number of rounds has not been reached.
        drawn: bool,
        terminate: bool,
    },
    Payment {
        player: PlayerId,
        rounds: Vec<u32>,
        partners: Vec<Vec<PlayerId>>,
        points: i64,
        ecu: i64,
        sgd: f64,
    },
}

impl Record {
    pub fn round(&self) -> Option<u32> {
        match self {
            Record::Opportunities { round, .. }
            | Record::Stage1 { round, .. }
            | Record::Stage2 { round, .. }
            | Record::Links { round, .. }
            | Record::Action { round, .. }
            | Record::PairPayoff { round, .. }
            | Record::RoundSummary { round, .. }
            | Record::Termination { round, .. } => Some(*round),
            Record::Header(_) | Record::Payment { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: Header,
    pub records: Vec<Record>,
}

impl EventLog {
    pub fn new(header: Header) -> Self {
        Self { header, records: Vec::new() }
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    /// Number of rounds with a summary record.
    pub fn rounds_played(&self) -> u32 {
        self.records
            .iter()
            .filter(|r| matches!(r, Record::RoundSummary { .. }))
            .count() as u32
    }

    /// Records belonging to `round`, in log order.
    pub fn round_records(&self, round: u32) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.round() == Some(round))
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let header = Record::Header(self.header.clone());
        for rec in std::iter::once(&header).chain(&self.records) {
            out.push_str(&serde_json::to_string(rec).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, LogError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (first_no, first) = lines.next().ok_or(LogError::Empty)?;
        let probe: serde_json::Value = serde_json::from_str(first)
            .map_err(|source| LogError::Parse { line: first_no + 1, source })?;
        if probe.get("kind").and_then(|k| k.as_str()) != Some("header") {
            return Err(LogError::MissingHeader);
        }
        let found = probe.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != SCHEMA_VERSION as u64 {
            return Err(LogError::SchemaVersion { found, expected: SCHEMA_VERSION });
        }
        let header = match serde_json::from_value::<Record>(probe)
            .map_err(|source| LogError::Parse { line: first_no + 1, source })?
        {
            Record::Header(h) => h,
            _ => return Err(LogError::MissingHeader),
        };
        let mut records = Vec::new();
        for (no, line) in lines {
            let rec: Record =
                serde_json::from_str(line).map_err(|source| LogError::Parse { line: no + 1, source })?;
            if matches!(rec, Record::Header(_)) {
                return Err(LogError::DuplicateHeader(no + 1));
            }
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), LogError> {
        fs::write(path, self.to_ndjson())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, LogError> {
        Self::from_ndjson(&fs::read_to_string(path)?)
    }
}
