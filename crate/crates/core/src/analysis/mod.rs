//! Behavioral measures computed from event logs.
//!
//! The regression models of the original study control for participant
//! demographics a simulator does not have, so every behavioral measure here
//! is a stratified frequency table over the same conditioning variables.

mod report;
mod stats;
mod walk;

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::agents::{bucket, HistoryBucket};
use crate::game::{Action, OpportunityKind, Pair, PlayerId};
use crate::log::{EventLog, Header};

pub use report::{report, AnalysisReport, PaperReference, PAPER_TABLE1};
pub use stats::{mann_whitney, mann_whitney_exact, mann_whitney_normal, mean_se, MeanSe, RankMethod, RankTestResult};
use walk::walk;

/// Rounds with a complete five-round history behind every decision.
pub const HISTORY_ROUNDS: RangeInclusive<u32> = 6..=21;
/// Rounds used for treatment-level means.
pub const MAIN_ROUNDS: RangeInclusive<u32> = 2..=21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsKind {
    Removal,
    Proposal,
    Acceptance,
}

impl ObsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObsKind::Removal => "removal",
            ObsKind::Proposal => "proposal",
            ObsKind::Acceptance => "acceptance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    Default,
    MutualProposal,
    ProposalAcceptance,
}

impl LinkOrigin {
    pub const ALL: [LinkOrigin; 3] = [LinkOrigin::Default, LinkOrigin::MutualProposal, LinkOrigin::ProposalAcceptance];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkOrigin::Default => "default",
            LinkOrigin::MutualProposal => "mutual_proposal",
            LinkOrigin::ProposalAcceptance => "proposal_acceptance",
        }
    }
}

/// Treatment label of a log: the header's name, or the grid cell implied by
/// the config when the name is empty.
pub fn treatment_of(h: &Header) -> String {
    if !h.treatment.is_empty() {
        return h.treatment.clone();
    }
    // Anything from a quarter of all pairs upward counts as fast rewiring.
    let share = h.config.pairs_per_round as f64 / h.config.total_pairs() as f64;
    let speed = if share >= 0.25 { "fast" } else { "slow" };
    let unc = if h.config.noise_eps > 0.0 { "unc" } else { "nounc" };
    format!("{speed}-{unc}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpportunityObservation {
    pub log: usize,
    pub treatment: String,
    pub round: u32,
    pub decider: PlayerId,
    pub counterpart: PlayerId,
    pub kind: ObsKind,
    pub counterpart_bucket: HistoryBucket,
    /// Decider's intended action last round; None for NoAction.
    pub decider_last_intended: Option<Action>,
    pub decision: bool,
    /// Only for removals: how the link came about.
    pub link_origin: Option<LinkOrigin>,
}

/// Every prompted (decider, counterpart) decision within `rounds`, in
/// (log, round, stage, decider, counterpart) order. Rounds before the sixth
/// never qualify since buckets need five recorded rounds.
pub fn extract_opportunities(logs: &[EventLog], rounds: RangeInclusive<u32>) -> Vec<OpportunityObservation> {
    let mut out = Vec::new();
    for (id, log) in logs.iter().enumerate() {
        let treatment = treatment_of(&log.header);
        let first = (*rounds.start()).max(log.header.config.history_window as u32 + 1);
        walk(log, |ctx| {
            if ctx.round < first || ctx.round > *rounds.end() {
                return;
            }
            let obs = |decider: PlayerId, counterpart: PlayerId, kind, decision, link_origin| OpportunityObservation {
                log: id,
                treatment: treatment.clone(),
                round: ctx.round,
                decider,
                counterpart,
                kind,
                counterpart_bucket: bucket(&ctx.histories[counterpart.0]),
                decider_last_intended: ctx.prev_intended[decider.0],
                decision,
                link_origin,
            };
            let mut stage1 = Vec::new();
            for op in ctx.opportunities {
                for (p, q) in [(op.pair.lo(), op.pair.hi()), (op.pair.hi(), op.pair.lo())] {
                    let (remove, propose) = ctx.stage1.get(&p).map(|(r, s)| (r.as_slice(), s.as_slice())).unwrap_or_default();
                    stage1.push(match op.kind {
                        OpportunityKind::Removable => {
                            obs(p, q, ObsKind::Removal, remove.contains(&q), ctx.origins.get(&op.pair).copied())
                        }
                        OpportunityKind::Proposable => obs(p, q, ObsKind::Proposal, propose.contains(&q), None),
                    });
                }
            }
            stage1.sort_by_key(|o| (o.decider, o.counterpart));
            out.extend(stage1);
            for (&p, (accepted, rejected)) in ctx.stage2 {
                let mut answers: Vec<(PlayerId, bool)> =
                    accepted.iter().map(|&q| (q, true)).chain(rejected.iter().map(|&q| (q, false))).collect();
                answers.sort();
                out.extend(answers.into_iter().map(|(q, yes)| obs(p, q, ObsKind::Acceptance, yes, None)));
            }
        });
    }
    out
}

/// Count and frequency of positive decisions in one (treatment, bucket) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqCell {
    pub treatment: String,
    pub bucket: HistoryBucket,
    /// Which observations were pooled: `removal`, `proposal`, `acceptance`
    /// or `proposal_or_acceptance`.
    pub subset: &'static str,
    pub n: usize,
    pub hits: usize,
}

impl FreqCell {
    /// None for an empty cell.
    pub fn freq(&self) -> Option<f64> {
        (self.n > 0).then(|| self.hits as f64 / self.n as f64)
    }

    /// Binomial standard error at the observed frequency.
    pub fn se(&self) -> Option<f64> {
        self.freq().map(|p| (p * (1.0 - p) / self.n as f64).sqrt())
    }
}

fn freq_table(obs: &[OpportunityObservation], kinds: &[ObsKind], subset: &'static str) -> Vec<FreqCell> {
    let treatments: Vec<&String> = obs.iter().map(|o| &o.treatment).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut cells = Vec::new();
    for t in treatments {
        for b in HistoryBucket::RATED {
            let mut cell = FreqCell { treatment: t.clone(), bucket: b, subset, n: 0, hits: 0 };
            for o in obs.iter().filter(|o| &o.treatment == t && o.counterpart_bucket == b && kinds.contains(&o.kind)) {
                cell.n += 1;
                cell.hits += o.decision as usize;
            }
            cells.push(cell);
        }
    }
    cells
}

/// Removal frequency per (treatment, counterpart bucket). Unrated
/// counterparts are left out.
pub fn leniency_table(obs: &[OpportunityObservation]) -> Vec<FreqCell> {
    freq_table(obs, &[ObsKind::Removal], "removal")
}

/// Proposal frequency per (treatment, counterpart bucket). With
/// `with_acceptance` the table also carries acceptance-only cells and cells
/// pooling proposals with acceptances.
pub fn forgiveness_table(obs: &[OpportunityObservation], with_acceptance: bool) -> Vec<FreqCell> {
    let mut cells = freq_table(obs, &[ObsKind::Proposal], "proposal");
    if with_acceptance {
        cells.extend(freq_table(obs, &[ObsKind::Acceptance], "acceptance"));
        cells.extend(freq_table(obs, &[ObsKind::Proposal, ObsKind::Acceptance], "proposal_or_acceptance"));
    }
    cells
}

/// Bins over the defecting-neighbor fraction: `{0}` first, then
/// `(edges[i-1], edges[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FBins {
    edges: Vec<f64>,
}

impl FBins {
    /// `edges` must start at 0, end at 1 and increase strictly.
    pub fn new(edges: Vec<f64>) -> Option<Self> {
        let ok = edges.len() >= 2
            && edges[0] == 0.0
            && *edges.last().unwrap() == 1.0
            && edges.windows(2).all(|w| w[0] < w[1]);
        ok.then_some(Self { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, f: f64) -> usize {
        if f <= 0.0 {
            return 0;
        }
        self.edges.iter().position(|&e| f <= e).unwrap_or(self.edges.len() - 1)
    }

    pub fn label(&self, i: usize) -> String {
        if i == 0 {
            "0".into()
        } else {
            format!("({},{}]", self.edges[i - 1], self.edges[i])
        }
    }
}

impl Default for FBins {
    fn default() -> Self {
        Self::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).expect("valid default bins")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveCell {
    pub treatment: String,
    pub bin: String,
    pub n: usize,
    pub defections: usize,
    /// Mean defecting fraction over the cell's observations.
    pub mean_f: Option<f64>,
}

impl CurveCell {
    pub fn freq(&self) -> Option<f64> {
        (self.n > 0).then(|| self.defections as f64 / self.n as f64)
    }
}

/// P(intended D at t | intended C at t-1) by the share of t-1 neighbors whose
/// actual action was D. Players without neighbors at t are skipped.
pub fn action_punishment_curve(logs: &[EventLog], bins: &FBins, rounds: RangeInclusive<u32>) -> Vec<CurveCell> {
    let mut acc: BTreeMap<String, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for log in logs {
        let cells = acc.entry(treatment_of(&log.header)).or_insert_with(|| vec![(0, 0, 0.0); bins.len()]);
        walk(log, |ctx| {
            if ctx.round < 2 || !rounds.contains(&ctx.round) {
                return;
            }
            for p in 0..ctx.intended.len() {
                let Some(now) = ctx.intended[p] else { continue };
                if ctx.prev_intended[p] != Some(Action::C) {
                    continue;
                }
                let seen: Vec<Action> =
                    ctx.start.neighbors(PlayerId(p)).into_iter().filter_map(|q| ctx.prev_actual[q.0]).collect();
                let f = if seen.is_empty() {
                    0.0
                } else {
                    seen.iter().filter(|a| **a == Action::D).count() as f64 / seen.len() as f64
                };
                let c = &mut cells[bins.index(f)];
                c.0 += 1;
                c.1 += (now == Action::D) as usize;
                c.2 += f;
            }
        });
    }
    acc.into_iter()
        .flat_map(|(t, cells)| {
            cells.into_iter().enumerate().map(move |(i, (n, d, fsum))| CurveCell {
                treatment: t.clone(),
                bin: bins.label(i),
                n,
                defections: d,
                mean_f: (n > 0).then(|| fsum / n as f64),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpportunismRow {
    pub treatment: String,
    /// Player-rounds with at least four actual C in the displayed window.
    pub n_at_least_4: usize,
    pub d_at_least_4: usize,
    /// Player-rounds with exactly four.
    pub n_exactly_4: usize,
    pub d_exactly_4: usize,
}

impl OpportunismRow {
    pub fn rate(&self) -> Option<f64> {
        (self.n_at_least_4 > 0).then(|| self.d_at_least_4 as f64 / self.n_at_least_4 as f64)
    }

    pub fn rate_exactly_4(&self) -> Option<f64> {
        (self.n_exactly_4 > 0).then(|| self.d_exactly_4 as f64 / self.n_exactly_4 as f64)
    }
}

/// P(intended D | own displayed window holds at least four actual C).
/// Only player-rounds where the player acts are counted.
pub fn opportunism_rate(logs: &[EventLog], rounds: RangeInclusive<u32>) -> Vec<OpportunismRow> {
    let mut acc: BTreeMap<String, OpportunismRow> = BTreeMap::new();
    for log in logs {
        let t = treatment_of(&log.header);
        let row = acc.entry(t.clone()).or_insert_with(|| OpportunismRow {
            treatment: t,
            n_at_least_4: 0,
            d_at_least_4: 0,
            n_exactly_4: 0,
            d_exactly_4: 0,
        });
        walk(log, |ctx| {
            if !rounds.contains(&ctx.round) {
                return;
            }
            for (p, intended) in ctx.intended.iter().enumerate() {
                let Some(a) = intended else { continue };
                let h = &ctx.histories[p];
                if h.len() < crate::agents::BUCKET_SPAN {
                    continue;
                }
                let cs = h.iter().take(crate::agents::BUCKET_SPAN).filter(|s| *s == Some(Action::C)).count();
                let d = (*a == Action::D) as usize;
                if cs >= 4 {
                    row.n_at_least_4 += 1;
                    row.d_at_least_4 += d;
                }
                if cs == 4 {
                    row.n_exactly_4 += 1;
                    row.d_exactly_4 += d;
                }
            }
        });
    }
    acc.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSpell {
    pub log: usize,
    pub pair: Pair,
    pub origin: LinkOrigin,
    pub first_round: u32,
    /// Consecutive rounds the link was played on.
    pub duration: u32,
}

/// Every link lifetime of every log. A lifetime counts the consecutive
/// rounds the link appears in the played network; links cut before they were
/// ever played have no lifetime.
pub fn link_spells(logs: &[EventLog]) -> Vec<LinkSpell> {
    let mut out = Vec::new();
    for (id, log) in logs.iter().enumerate() {
        let mut open: BTreeMap<Pair, LinkSpell> = BTreeMap::new();
        let mut done = Vec::new();
        walk(log, |ctx| {
            let live: Vec<Pair> = ctx.played.links().collect();
            let closed: Vec<Pair> = open.keys().copied().filter(|p| !ctx.played.contains(*p)).collect();
            for p in closed {
                done.push(open.remove(&p).expect("open spell"));
            }
            for pair in live {
                let spell = open.entry(pair).or_insert_with(|| {
                    let origin = match ctx.origins.get(&pair) {
                        Some(&o) => o,
                        None if ctx.proposed(pair.lo(), pair.hi()) && ctx.proposed(pair.hi(), pair.lo()) => {
                            LinkOrigin::MutualProposal
                        }
                        None => LinkOrigin::ProposalAcceptance,
                    };
                    LinkSpell { log: id, pair, origin, first_round: ctx.round, duration: 0 }
                });
                spell.duration += 1;
            }
        });
        done.extend(open.into_values());
        done.sort_by_key(|s| (s.first_round, s.pair));
        out.extend(done);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxonomyRow {
    pub treatment: String,
    pub origin: LinkOrigin,
    pub count: usize,
    pub mean_duration: Option<f64>,
}

/// Count and mean duration of link lifetimes per (treatment, origin).
pub fn link_taxonomy(logs: &[EventLog]) -> Vec<TaxonomyRow> {
    let mut acc: BTreeMap<(String, LinkOrigin), (usize, u64)> = BTreeMap::new();
    let treatments: Vec<String> = logs.iter().map(|l| treatment_of(&l.header)).collect();
    for t in &treatments {
        for o in LinkOrigin::ALL {
            acc.entry((t.clone(), o)).or_default();
        }
    }
    for s in link_spells(logs) {
        let e = acc.entry((treatments[s.log].clone(), s.origin)).or_default();
        e.0 += 1;
        e.1 += s.duration as u64;
    }
    acc.into_iter()
        .map(|((treatment, origin), (count, total))| TaxonomyRow {
            treatment,
            origin,
            count,
            mean_duration: (count > 0).then(|| total as f64 / count as f64),
        })
        .collect()
}
