use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Action;

/// A player's displayed actual actions, most recent first.
///
/// `None` marks a round in which the player had no neighbor (shown as "-").
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistoryWindow {
    entries: VecDeque<Option<Action>>,
}

impl HistoryWindow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a window from slots given most recent first.
    pub fn from_recent_first(slots: impl IntoIterator<Item = Option<Action>>) -> Self {
        Self { entries: slots.into_iter().collect() }
    }

    pub(crate) fn push(&mut self, slot: Option<Action>, capacity: usize) {
        self.entries.push_front(slot);
        self.entries.truncate(capacity);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self) -> Option<Option<Action>> {
        self.entries.front().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<Action>> + '_ {
        self.entries.iter().copied()
    }

    /// Number of actual C entries; NoAction slots count as non-C.
    pub fn coop_count(&self) -> usize {
        self.entries.iter().filter(|s| **s == Some(Action::C)).count()
    }
}

/// Rolling record of every player's actual actions over a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryBook {
    window: usize,
    windows: Vec<HistoryWindow>,
}

impl HistoryBook {
    pub fn new(players: usize, window: usize) -> Self {
        Self { window, windows: vec![HistoryWindow::new(); players] }
    }

    pub fn record(&mut self, actual: &[Option<Action>]) {
        for (w, a) in self.windows.iter_mut().zip(actual) {
            w.push(*a, self.window);
        }
    }

    pub fn get(&self, p: usize) -> &HistoryWindow {
        &self.windows[p]
    }

    pub fn all(&self) -> &[HistoryWindow] {
        &self.windows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{C, D};

    #[test]
    fn window_caps_and_orders_recent_first() {
        let mut w = HistoryWindow::new();
        for (i, a) in [Some(C), Some(D), None, Some(C), Some(C), Some(D), Some(C)].into_iter().enumerate() {
            w.push(a, 5);
            assert_eq!(w.len(), (i + 1).min(5));
            assert_eq!(w.latest(), Some(a));
        }
        let slots: Vec<_> = w.iter().collect();
        assert_eq!(slots, vec![Some(C), Some(D), Some(C), Some(C), None]);
        assert_eq!(w.coop_count(), 3);
    }

    #[test]
    fn serializes_no_action_as_null() {
        let w = HistoryWindow::from_recent_first([Some(C), None]);
        assert_eq!(serde_json::to_string(&w).unwrap(), r#"["C",null]"#);
    }
}
