use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PlayerId;

/// Unordered pair of distinct players, stored with the smaller index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pair {
    lo: PlayerId,
    hi: PlayerId,
}

impl Pair {
    /// Returns `None` for a self-pair.
    pub fn new(a: PlayerId, b: PlayerId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Self { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn lo(self) -> PlayerId {
        self.lo
    }

    pub fn hi(self) -> PlayerId {
        self.hi
    }

    pub fn contains(self, p: PlayerId) -> bool {
        self.lo == p || self.hi == p
    }

    /// The endpoint that is not `p`, if `p` is an endpoint.
    pub fn other(self, p: PlayerId) -> Option<PlayerId> {
        if self.lo == p {
            Some(self.hi)
        } else if self.hi == p {
            Some(self.lo)
        } else {
            None
        }
    }

    /// All pairs on `n` players in lexicographic order.
    pub fn enumerate(n: usize) -> Vec<Pair> {
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                out.push(Pair { lo: PlayerId(a), hi: PlayerId(b) });
            }
        }
        out
    }
}

impl TryFrom<[usize; 2]> for Pair {
    type Error = String;

    fn try_from([a, b]: [usize; 2]) -> Result<Self, Self::Error> {
        Pair::new(PlayerId(a), PlayerId(b)).ok_or_else(|| format!("self-pair ({a}, {a})"))
    }
}

impl From<Pair> for [usize; 2] {
    fn from(p: Pair) -> Self {
        [p.lo.0, p.hi.0]
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo.0, self.hi.0)
    }
}

/// Undirected simple graph on `group_size` players.
///
/// Links are stored as unordered pairs, so symmetry and the absence of
/// self-links hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkState {
    size: usize,
    links: BTreeSet<Pair>,
}

impl NetworkState {
    pub fn empty(size: usize) -> Self {
        Self { size, links: BTreeSet::new() }
    }

    pub fn complete(size: usize) -> Self {
        Self { size, links: Pair::enumerate(size).into_iter().collect() }
    }

    /// Builds a network from arbitrary pairs. Pairs touching a player
    /// outside `0..size` are rejected.
    pub fn from_pairs(size: usize, pairs: impl IntoIterator<Item = Pair>) -> Option<Self> {
        let links: BTreeSet<Pair> = pairs.into_iter().collect();
        if links.iter().any(|p| p.hi.0 >= size) {
            return None;
        }
        Some(Self { size, links })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.links.contains(&pair)
    }

    pub fn links(&self) -> impl Iterator<Item = Pair> + '_ {
        self.links.iter().copied()
    }

    pub(crate) fn insert(&mut self, pair: Pair) {
        debug_assert!(pair.hi.0 < self.size);
        self.links.insert(pair);
    }

    pub(crate) fn remove(&mut self, pair: Pair) {
        self.links.remove(&pair);
    }

    pub fn degree(&self, p: PlayerId) -> usize {
        self.links.iter().filter(|l| l.contains(p)).count()
    }

    /// Neighbors of `p` in increasing index order.
    pub fn neighbors(&self, p: PlayerId) -> Vec<PlayerId> {
        let mut out: Vec<PlayerId> = self.links.iter().filter_map(|l| l.other(p)).collect();
        out.sort();
        out
    }

    /// Adjacency lists indexed by player.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.size];
        for l in &self.links {
            adj[l.lo.0].push(l.hi.0);
            adj[l.hi.0].push(l.lo.0);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        adj
    }

    /// Adjacency matrix; `m[i][j]` is true when `i` and `j` are linked.
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.size]; self.size];
        for l in &self.links {
            m[l.lo.0][l.hi.0] = true;
            m[l.hi.0][l.lo.0] = true;
        }
        m
    }
}
