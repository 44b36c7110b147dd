use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use repnet_core::agents::{SeatSpec, StrategyPack};
use repnet_core::game::{Speed, TreatmentConfig};
use repnet_core::sim::{expand_roster, ConfigOverrides, TreatmentEntry};
use serde::Deserialize;

use crate::ServerError;

/// Roster name written to the log header for human seats.
pub const HUMAN: &str = "human";

/// A session file as written by the operator.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub session_id: String,
    /// Treatment name in the log header and file name. Defaults to
    /// `{speed}-{unc|nounc}`.
    #[serde(default)]
    pub treatment: Option<String>,
    pub speed: Speed,
    pub uncertainty: bool,
    pub seed: u64,
    #[serde(default = "default_log_dir")]
    pub log_dir: PathBuf,
    /// `human`, `human:TOKEN` or a bot seat spec; `SPEC*k` repeats.
    pub seats: Vec<String>,
    #[serde(default)]
    pub config: ConfigOverrides,
    /// Seconds per stage. Absent means stages wait indefinitely.
    #[serde(default)]
    pub stage_timeouts: Option<StageTimeouts>,
    #[serde(default)]
    pub timeout_policy: TimeoutPolicyFile,
    #[serde(default)]
    pub packs: BTreeMap<String, PathBuf>,
}

fn default_log_dir() -> PathBuf {
    PathBuf::from("logs")
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTimeouts {
    pub stage1: f64,
    pub stage2: f64,
    pub stage3: f64,
}

impl StageTimeouts {
    pub fn uniform(secs: f64) -> Self {
        Self { stage1: secs, stage2: secs, stage3: secs }
    }

    pub(crate) fn millis(&self, stage: u8) -> u64 {
        let s = match stage {
            1 => self.stage1,
            2 => self.stage2,
            _ => self.stage3,
        };
        (s * 1000.0).round() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutPolicyFile {
    #[default]
    DefaultAction,
    FallbackBot(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seat {
    Human { token: Option<String> },
    Bot(SeatSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeoutPolicy {
    /// Stage 1: no changes. Stage 2: reject all. Stage 3: repeat the last
    /// intended action, D when there is none.
    DefaultAction,
    /// A bot with these parameters answers for the absent player.
    FallbackBot(SeatSpec),
}

/// A validated session, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub session_id: String,
    pub treatment: String,
    pub config: TreatmentConfig,
    pub seed: u64,
    pub log_dir: PathBuf,
    pub seats: Vec<Seat>,
    pub stage_timeouts: Option<StageTimeouts>,
    pub timeout_policy: TimeoutPolicy,
}

impl SessionConfig {
    /// Parses a session file; pack paths are relative to `base`, and so is
    /// a relative `log_dir`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ServerError> {
        let file: SessionFile = toml::from_str(text).map_err(|e| ServerError::Config(e.to_string()))?;
        let mut packs = BTreeMap::new();
        for (name, rel) in &file.packs {
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ServerError::Config(format!("pack {name} ({}): {e}", path.display())))?;
            let pack = StrategyPack::from_toml(&text).map_err(|e| ServerError::Config(e.to_string()))?;
            packs.insert(name.clone(), pack);
        }
        let mut cfg = Self::resolve(&file, &packs)?;
        if cfg.log_dir.is_relative() {
            cfg.log_dir = base.join(&cfg.log_dir);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(file: &SessionFile, packs: &BTreeMap<String, StrategyPack>) -> Result<Self, ServerError> {
        let entry = TreatmentEntry {
            name: file.treatment.clone().unwrap_or_else(|| {
                format!("{}-{}", file.speed.as_str(), if file.uncertainty { "unc" } else { "nounc" })
            }),
            speed: file.speed,
            uncertainty: file.uncertainty,
            roster: None,
            config: file.config.clone(),
        };
        let config = entry.config();
        let bad = |m: String| ServerError::Config(m);
        let seats = expand_roster(&file.seats)
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(|s| match s.split_once(':') {
                _ if s == HUMAN => Ok(Seat::Human { token: None }),
                Some((HUMAN, token)) => Ok(Seat::Human { token: Some(token.to_string()) }),
                _ => SeatSpec::resolve(s, file.speed, packs).map(Seat::Bot).map_err(|e| bad(e.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let timeout_policy = match &file.timeout_policy {
            TimeoutPolicyFile::DefaultAction => TimeoutPolicy::DefaultAction,
            TimeoutPolicyFile::FallbackBot(spec) => {
                TimeoutPolicy::FallbackBot(SeatSpec::resolve(spec, file.speed, packs).map_err(|e| bad(e.to_string()))?)
            }
        };
        let cfg = Self {
            session_id: file.session_id.clone(),
            treatment: entry.name,
            config,
            seed: file.seed,
            log_dir: file.log_dir.clone(),
            seats,
            stage_timeouts: file.stage_timeouts,
            timeout_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        let bad = |m: String| Err(ServerError::Config(m));
        self.config.validate().map_err(|e| ServerError::Config(e.to_string()))?;
        if self.session_id.is_empty() || !self.session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad(format!("session id {:?} must be non-empty and use only letters, digits, '-' or '_'", self.session_id));
        }
        if self.seats.len() != self.config.group_size {
            return bad(format!("{} seats listed but the group has {} players", self.seats.len(), self.config.group_size));
        }
        if let Some(t) = &self.stage_timeouts {
            for (stage, secs) in [(1, t.stage1), (2, t.stage2), (3, t.stage3)] {
                if !(secs.is_finite() && secs > 0.0) {
                    return bad(format!("stage {stage} timeout must be positive, got {secs}"));
                }
            }
        }
        let mut tokens = BTreeSet::new();
        for seat in &self.seats {
            if let Seat::Human { token: Some(t) } = seat {
                if t.is_empty() || !tokens.insert(t.as_str()) {
                    return bad(format!("join token {t:?} is empty or repeated"));
                }
            }
        }
        Ok(())
    }

    /// Header roster: the bot spec as written, `human` for live seats.
    pub fn roster_names(&self) -> Vec<String> {
        self.seats
            .iter()
            .map(|s| match s {
                Seat::Human { .. } => HUMAN.to_string(),
                Seat::Bot(spec) => spec.name.clone(),
            })
            .collect()
    }

    /// Where the finished session's log is written.
    pub fn log_path(&self) -> PathBuf {
        self.log_dir.join(format!("{}-{}.ndjson", self.treatment, self.session_id))
    }
}
