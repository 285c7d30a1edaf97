//! The policy-induced Markov chain over reachable states.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::model::{ActionId, FeatureState};
use crate::prob::Prob;

pub const DEADLOCK_ACTION: &str = "<deadlock>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Action(ActionId),
    /// No enabled action; the state was closed with a probability-1 self-loop.
    Deadlock,
}

/// Explicit DTMC in compressed-row form. State indices follow BFS discovery
/// order from the initial state (index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct InducedDtmc {
    pub(crate) states: Vec<FeatureState>,
    pub(crate) index: HashMap<FeatureState, usize>,
    pub(crate) chosen: Vec<Choice>,
    pub(crate) row_start: Vec<usize>,
    pub(crate) targets: Vec<usize>,
    pub(crate) probs: Vec<Prob>,
    pub(crate) labels: BTreeMap<String, Vec<usize>>,
    pub(crate) action_names: Vec<String>,
    pub(crate) warnings: Vec<String>,
}

impl InducedDtmc {
    pub fn reachable_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.targets.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn states(&self) -> &[FeatureState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &FeatureState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &FeatureState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn choice(&self, i: usize) -> Choice {
        self.chosen[i]
    }

    pub fn action_label(&self, i: usize) -> &str {
        match self.chosen[i] {
            Choice::Action(a) => &self.action_names[a.0],
            Choice::Deadlock => DEADLOCK_ACTION,
        }
    }

    /// Outgoing `(target, probability)` pairs of state `i`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = (usize, Prob)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Sorted state indices satisfying `label`.
    pub fn label_set(&self, label: &str) -> Option<&[usize]> {
        self.labels.get(label).map(Vec::as_slice)
    }

    pub fn label_mask(&self, label: &str) -> Option<Vec<bool>> {
        let set = self.label_set(label)?;
        let mut mask = vec![false; self.states.len()];
        for &i in set {
            mask[i] = true;
        }
        Some(mask)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_rational(&self) -> bool {
        self.probs.iter().all(Prob::is_exact)
    }

    /// Explicit-state dump: `STATES n`, one `i: action | j:p ...` line per
    /// state, then one `LABEL name: i ...` line per label.
    pub fn to_explicit_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "STATES {}", self.states.len());
        for i in 0..self.states.len() {
            let _ = write!(out, "{i}: {} |", self.action_label(i));
            for (j, p) in self.successors(i) {
                let _ = write!(out, " {j}:{}", p.dump_string());
            }
            out.push('\n');
        }
        for (name, set) in &self.labels {
            let _ = write!(out, "LABEL {name}:");
            for i in set {
                let _ = write!(out, " {i}");
            }
            out.push('\n');
        }
        out
    }
}
