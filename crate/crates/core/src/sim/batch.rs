use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{run_session, SimError};
use crate::agents::{SeatSpec, StrategyPack};
use crate::game::{PayoffMatrix, Speed, TreatmentConfig};
use crate::log::EventLog;
use crate::rng::derive_seed;

/// Optional per-treatment changes to the laboratory parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub group_size: Option<usize>,
    pub pairs_per_round: Option<usize>,
    pub noise_eps: Option<f64>,
    pub payoff: Option<PayoffMatrix>,
    pub min_rounds: Option<u32>,
    pub continue_prob_after_min: Option<f64>,
    pub history_window: Option<usize>,
    pub payment_rounds: Option<usize>,
    pub payment_partners_per_round: Option<usize>,
    pub ecu_per_sgd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentEntry {
    pub name: String,
    pub speed: Speed,
    pub uncertainty: bool,
    /// Seat specs; `NAME*k` repeats a seat k times. Falls back to the
    /// batch-wide roster.
    #[serde(default)]
    pub roster: Option<Vec<String>>,
    #[serde(default)]
    pub config: ConfigOverrides,
}

impl TreatmentEntry {
    pub fn config(&self) -> TreatmentConfig {
        let o = &self.config;
        let base = TreatmentConfig::standard(self.speed, self.uncertainty);
        TreatmentConfig {
            group_size: o.group_size.unwrap_or(base.group_size),
            pairs_per_round: o.pairs_per_round.unwrap_or(base.pairs_per_round),
            noise_eps: o.noise_eps.unwrap_or(base.noise_eps),
            payoff: o.payoff.unwrap_or(base.payoff),
            min_rounds: o.min_rounds.unwrap_or(base.min_rounds),
            continue_prob_after_min: o.continue_prob_after_min.unwrap_or(base.continue_prob_after_min),
            history_window: o.history_window.unwrap_or(base.history_window),
            payment_rounds: o.payment_rounds.unwrap_or(base.payment_rounds),
            payment_partners_per_round: o.payment_partners_per_round.unwrap_or(base.payment_partners_per_round),
            ecu_per_sgd: o.ecu_per_sgd.unwrap_or(base.ecu_per_sgd),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(rename = "treatment")]
    pub treatments: Vec<TreatmentEntry>,
    #[serde(default)]
    pub roster: Option<Vec<String>>,
    pub replications: usize,
    #[serde(default)]
    pub root_seed: u64,
    /// Where logs go when no directory is passed; relative to the batch spec file.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Extra strategy packs by name, as paths relative to the batch spec file.
    #[serde(default)]
    pub packs: BTreeMap<String, PathBuf>,
    #[serde(skip)]
    pub loaded_packs: BTreeMap<String, StrategyPack>,
}

pub fn expand_roster(roster: &[String]) -> Result<Vec<String>, SimError> {
    let mut out = Vec::new();
    for entry in roster {
        match entry.rsplit_once('*') {
            Some((name, k)) => {
                let k: usize = k.trim().parse().map_err(|_| SimError::Spec(format!("bad repeat count in `{entry}`")))?;
                out.extend(std::iter::repeat_n(name.trim().to_string(), k));
            }
            None => out.push(entry.trim().to_string()),
        }
    }
    Ok(out)
}

impl BatchSpec {
    /// Parses a spec; pack paths and a relative `output_path` are resolved
    /// against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, SimError> {
        let mut spec: BatchSpec = toml::from_str(text).map_err(|e| SimError::Spec(e.to_string()))?;
        if let Some(out) = spec.output_path.as_mut().filter(|p| p.is_relative()) {
            *out = base.join(&*out);
        }
        for (name, file) in &spec.packs {
            let full = base.join(file);
            let text = fs::read_to_string(&full).map_err(|e| SimError::Spec(format!("{}: {e}", full.display())))?;
            spec.loaded_packs.insert(name.clone(), StrategyPack::from_toml(&text)?);
        }
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn check(&self) -> Result<(), SimError> {
        if self.replications < 1 {
            return Err(SimError::Spec("replications must be at least 1".into()));
        }
        if self.treatments.is_empty() {
            return Err(SimError::Spec("no [[treatment]] entries".into()));
        }
        for t in &self.treatments {
            let cfg = t.config();
            cfg.validate()?;
            let seats = self.seats(t)?;
            if seats.len() != cfg.group_size {
                return Err(SimError::Spec(format!(
                    "treatment `{}`: roster has {} seats, group_size is {}",
                    t.name,
                    seats.len(),
                    cfg.group_size
                )));
            }
        }
        Ok(())
    }

    /// Resolved roster for one treatment.
    pub fn seats(&self, t: &TreatmentEntry) -> Result<Vec<SeatSpec>, SimError> {
        let raw = t
            .roster
            .as_ref()
            .or(self.roster.as_ref())
            .ok_or_else(|| SimError::Spec(format!("treatment `{}` has no roster", t.name)))?;
        expand_roster(raw)?
            .iter()
            .map(|s| SeatSpec::resolve(s, t.speed, &self.loaded_packs).map_err(SimError::from))
            .collect()
    }
}

/// Seed of replication `rep` of treatment index `treatment`: the labelled
/// hash of `root` with label `session/{treatment}/{rep}`.
pub fn session_seed(root: u64, treatment: usize, rep: usize) -> u64 {
    derive_seed(root, &format!("session/{treatment}/{rep}"))
}

/// File name of one batch log.
pub fn log_name(treatment: &str, rep: usize) -> String {
    format!("{treatment}-r{rep:02}.ndjson")
}

/// Runs every (treatment, replication) session in parallel. Logs come back in
/// treatment-then-replication order and, when `out` is given, are written to
/// `<out>/<treatment>-rNN.ndjson` as each session finishes.
pub fn run_batch(spec: &BatchSpec, out: Option<&Path>) -> Result<Vec<EventLog>, SimError> {
    let out = out.or(spec.output_path.as_deref());
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })?;
    }
    let mut jobs = Vec::new();
    for (ti, t) in spec.treatments.iter().enumerate() {
        let seats = spec.seats(t)?;
        let cfg = t.config();
        for rep in 0..spec.replications {
            jobs.push((ti, rep, cfg.clone(), seats.clone()));
        }
    }
    jobs.into_par_iter()
        .map(|(ti, rep, cfg, seats)| {
            let name = &spec.treatments[ti].name;
            let log = run_session(&cfg, name, &seats, session_seed(spec.root_seed, ti, rep))?;
            if let Some(dir) = out {
                let path = dir.join(log_name(name, rep));
                log.write_to(&path).map_err(|e| SimError::Io {
                    path: path.display().to_string(),
                    source: match e {
                        crate::log::LogError::Io(io) => io,
                        other => std::io::Error::other(other.to_string()),
                    },
                })?;
            }
            Ok(log)
        })
        .collect()
}
