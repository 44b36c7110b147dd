//! Graph and homophily measures on network snapshots.
//!
//! Degenerate cases are reported as `None` rather than 0: clustering of a
//! player with fewer than two neighbors, and homophily of a type whose
//! members have no links. Averages skip `None` entries.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::game::{Action, NetworkState, PlayerId};
use crate::log::{EventLog, Record};

/// Innate type from the first-round intended action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeLabel {
    TypeC,
    TypeD,
}

pub fn degree(net: &NetworkState, p: PlayerId) -> usize {
    net.degree(p)
}

/// Links among `p`'s neighbors over C(n_p, 2).
pub fn local_clustering(net: &NetworkState, p: PlayerId) -> Option<f64> {
    let nbrs = net.neighbors(p);
    let k = nbrs.len();
    if k < 2 {
        return None;
    }
    let m = net.matrix();
    let mut closed = 0usize;
    for (i, a) in nbrs.iter().enumerate() {
        for b in &nbrs[i + 1..] {
            if m[a.0][b.0] {
                closed += 1;
            }
        }
    }
    Some(closed as f64 / (k * (k - 1) / 2) as f64)
}

/// Unnormalized betweenness over unordered endpoint pairs (Brandes'
/// accumulation). Unreachable pairs contribute nothing.
pub fn betweenness(net: &NetworkState) -> Vec<f64> {
    let n = net.size();
    let adj = net.adjacency();
    let mut cb = vec![0.0f64; n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    for s in 0..n {
        stack.clear();
        queue.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    // Every unordered pair was counted from both endpoints.
    cb.iter_mut().for_each(|c| *c /= 2.0);
    cb
}

/// Betweenness divided by the number of endpoint pairs excluding the node,
/// (n-1)(n-2)/2. Zero for graphs with fewer than three nodes.
pub fn normalized_betweenness(net: &NetworkState) -> Vec<f64> {
    let n = net.size();
    let raw = betweenness(net);
    if n < 3 {
        return vec![0.0; n];
    }
    let pairs = ((n - 1) * (n - 2) / 2) as f64;
    raw.into_iter().map(|c| c / pairs).collect()
}

/// Labels players by their round-1 intended action. A player without a
/// round-1 action (isolated in round 1) is labelled TypeD.
pub fn classify_types(log: &EventLog) -> Vec<TypeLabel> {
    let mut labels = vec![TypeLabel::TypeD; log.header.config.group_size];
    for r in &log.records {
        if let Record::Action { round: 1, player, intended, .. } = r {
            if *intended == Some(Action::C) {
                labels[player.0] = TypeLabel::TypeC;
            }
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homophily {
    /// Population share of the type.
    pub w: f64,
    /// Mean same-type links per member; `None` when the type is absent.
    pub s: Option<f64>,
    /// Mean cross-type links per member.
    pub o: Option<f64>,
    pub h: Option<f64>,
    pub ih: Option<f64>,
}

pub fn homophily(net: &NetworkState, labels: &[TypeLabel], ty: TypeLabel) -> Homophily {
    let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == ty).collect();
    let w = members.len() as f64 / labels.len() as f64;
    if members.is_empty() {
        return Homophily { w, s: None, o: None, h: None, ih: None };
    }
    let (mut same, mut cross) = (0usize, 0usize);
    for l in net.links() {
        let (a, b) = (labels[l.lo().0], labels[l.hi().0]);
        match (a == ty, b == ty) {
            // A same-type link counts once for each endpoint.
            (true, true) => same += 2,
            (true, false) | (false, true) => cross += 1,
            (false, false) => {}
        }
    }
    let m = members.len() as f64;
    let s = same as f64 / m;
    let o = cross as f64 / m;
    let (h, ih) = homophily_indices(w, s, o);
    Homophily { w, s: Some(s), o: Some(o), h, ih }
}

/// H = s/(s+o) and IH = (H-w)/(1-w), each `None` where undefined.
pub fn homophily_indices(w: f64, s: f64, o: f64) -> (Option<f64>, Option<f64>) {
    let h = (s + o > 0.0).then(|| s / (s + o));
    let ih = h.filter(|_| w < 1.0).map(|h| (h - w) / (1.0 - w));
    (h, ih)
}

/// Mean of the defined entries; `None` if there are none.
pub fn mean_defined(xs: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = xs.into_iter().flatten().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub degree: Vec<usize>,
    pub local_clustering: Vec<Option<f64>>,
    pub betweenness: Vec<f64>,
    pub betweenness_normalized: Vec<f64>,
    pub type_c: Homophily,
    pub type_d: Homophily,
    pub avg_degree: f64,
    pub avg_clustering: Option<f64>,
    pub avg_betweenness: f64,
    pub avg_betweenness_normalized: f64,
    /// Mean normalized betweenness over type-C players.
    pub avg_betweenness_type_c: Option<f64>,
    pub avg_betweenness_type_d: Option<f64>,
}

pub fn snapshot(net: &NetworkState, labels: &[TypeLabel]) -> MetricSnapshot {
    let n = net.size();
    let degree: Vec<usize> = (0..n).map(|p| net.degree(PlayerId(p))).collect();
    let local_clustering: Vec<Option<f64>> = (0..n).map(|p| local_clustering(net, PlayerId(p))).collect();
    let betweenness = betweenness(net);
    let betweenness_normalized = normalized_betweenness(net);
    let of_type = |ty: TypeLabel| {
        mean_defined((0..n).filter(|&i| labels[i] == ty).map(|i| Some(betweenness_normalized[i])))
    };
    MetricSnapshot {
        avg_degree: degree.iter().sum::<usize>() as f64 / n as f64,
        avg_clustering: mean_defined(local_clustering.iter().copied()),
        avg_betweenness: betweenness.iter().sum::<f64>() / n as f64,
        avg_betweenness_normalized: betweenness_normalized.iter().sum::<f64>() / n as f64,
        avg_betweenness_type_c: of_type(TypeLabel::TypeC),
        avg_betweenness_type_d: of_type(TypeLabel::TypeD),
        type_c: homophily(net, labels, TypeLabel::TypeC),
        type_d: homophily(net, labels, TypeLabel::TypeD),
        degree,
        local_clustering,
        betweenness,
        betweenness_normalized,
    }
}
