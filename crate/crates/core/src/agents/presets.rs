use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AgentError, BucketProbs, StrategyParams};
use crate::game::{Action, Speed};

const EMPIRICAL_NO_UNC: &str = include_str!("../../packs/empirical_no_unc.toml");
const EMPIRICAL_UNC: &str = include_str!("../../packs/empirical_unc.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    AlwaysC,
    AlwaysD,
    GrimNet,
    TitForTatMajority,
    EmpiricalNoUnc,
    EmpiricalUnc,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::AlwaysC,
        Preset::AlwaysD,
        Preset::GrimNet,
        Preset::TitForTatMajority,
        Preset::EmpiricalNoUnc,
        Preset::EmpiricalUnc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::AlwaysC => "AlwaysC",
            Preset::AlwaysD => "AlwaysD",
            Preset::GrimNet => "GrimNet",
            Preset::TitForTatMajority => "TitForTatMajority",
            Preset::EmpiricalNoUnc => "EmpiricalNoUnc",
            Preset::EmpiricalUnc => "EmpiricalUnc",
        }
    }
}

impl FromStr for Preset {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| AgentError::UnknownStrategy(s.to_string()))
    }
}

// Finite stand-ins for infinite log-odds: logistic(-1000) is exactly 0.0 and
// logistic(1000) exactly 1.0 in f64.
const NEVER: f64 = -1000.0;
const ALWAYS: f64 = 1000.0;

/// Parameters for `preset`. Empirical packs differ between slow and fast
/// rewiring; the other presets ignore `speed`.
pub fn preset(which: Preset, speed: Speed) -> StrategyParams {
    match which {
        Preset::AlwaysC => StrategyParams {
            remove_prob: BucketProbs::uniform(0.0),
            propose_prob: BucketProbs::uniform(1.0),
            accept_prob: BucketProbs::uniform(1.0),
            action_intercept: NEVER,
            action_slope: 0.0,
            opportunism_prob: 0.0,
            initial_action: Action::C,
        },
        Preset::AlwaysD => StrategyParams {
            remove_prob: BucketProbs::uniform(0.0),
            propose_prob: BucketProbs::uniform(1.0),
            accept_prob: BucketProbs::uniform(1.0),
            action_intercept: ALWAYS,
            action_slope: 0.0,
            opportunism_prob: 0.0,
            initial_action: Action::D,
        },
        // Cut anyone not highly cooperative; defect as soon as any neighbor
        // defected last round (the smallest positive share is 1/11).
        Preset::GrimNet => StrategyParams {
            remove_prob: BucketProbs { low: 1.0, medium: 1.0, high: 0.0, unrated: Some(0.0) },
            propose_prob: BucketProbs { low: 0.0, medium: 0.0, high: 1.0, unrated: Some(1.0) },
            accept_prob: BucketProbs { low: 0.0, medium: 0.0, high: 1.0, unrated: Some(1.0) },
            action_intercept: NEVER,
            action_slope: 1.0e6,
            opportunism_prob: 0.0,
            initial_action: Action::C,
        },
        // Defect when more than half of last round's neighbors defected.
        Preset::TitForTatMajority => StrategyParams {
            remove_prob: BucketProbs { low: 1.0, medium: 0.0, high: 0.0, unrated: None },
            propose_prob: BucketProbs { low: 0.0, medium: 0.5, high: 1.0, unrated: None },
            accept_prob: BucketProbs { low: 0.0, medium: 0.5, high: 1.0, unrated: None },
            action_intercept: -200.0,
            action_slope: 400.0,
            opportunism_prob: 0.0,
            initial_action: Action::C,
        },
        Preset::EmpiricalNoUnc => shipped(EMPIRICAL_NO_UNC).params(speed).clone(),
        Preset::EmpiricalUnc => shipped(EMPIRICAL_UNC).params(speed).clone(),
    }
}

fn shipped(text: &str) -> StrategyPack {
    StrategyPack::from_toml(text).expect("shipped strategy packs parse")
}

/// A strategy pack file: per-speed parameter sets plus descriptive tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPack {
    pub name: String,
    #[serde(default)]
    pub treatments: Vec<String>,
    /// True for packs whose numbers are read off published figures rather
    /// than fitted.
    #[serde(default)]
    pub approximate: bool,
    #[serde(default)]
    pub note: String,
    pub slow: StrategyParams,
    pub fast: StrategyParams,
}

impl StrategyPack {
    pub fn from_toml(text: &str) -> Result<Self, AgentError> {
        let pack: StrategyPack = toml::from_str(text).map_err(|e| AgentError::BadPack {
            name: "<unparsed>".into(),
            reason: e.to_string(),
        })?;
        for p in [&pack.slow, &pack.fast] {
            p.validate().map_err(|reason| AgentError::BadPack { name: pack.name.clone(), reason })?;
        }
        Ok(pack)
    }

    pub fn params(&self, speed: Speed) -> &StrategyParams {
        match speed {
            Speed::Slow => &self.slow,
            Speed::Fast => &self.fast,
        }
    }

    /// A pack that plays the same parameters at both speeds.
    pub fn single(name: &str, params: StrategyParams) -> Self {
        Self {
            name: name.into(),
            treatments: Vec::new(),
            approximate: false,
            note: String::new(),
            slow: params.clone(),
            fast: params,
        }
    }
}

/// One seat of a roster: the spec string as written and the resolved params.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatSpec {
    pub name: String,
    pub params: StrategyParams,
}

impl SeatSpec {
    /// Resolves `NAME` or `NAME:C` / `NAME:D` (overriding the first-round
    /// action). Names are looked up in `packs` first, then among presets.
    pub fn resolve(spec: &str, speed: Speed, packs: &BTreeMap<String, StrategyPack>) -> Result<Self, AgentError> {
        let (name, initial) = match spec.split_once(':') {
            None => (spec, None),
            Some((n, "C")) => (n, Some(Action::C)),
            Some((n, "D")) => (n, Some(Action::D)),
            Some(_) => return Err(AgentError::BadSeat(spec.into())),
        };
        let mut params = match packs.get(name) {
            Some(pack) => pack.params(speed).clone(),
            None => preset(name.parse()?, speed),
        };
        if let Some(a) = initial {
            params.initial_action = a;
        }
        Ok(Self { name: spec.into(), params })
    }
}
