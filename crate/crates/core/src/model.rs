//! MDP tuple `(S, s0, Act, Tr, rew, AP, L)` over factored integer states.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::prob::Prob;

/// A state as a vector of integer features, one per declared variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureState(Box<[i64]>);

impl FeatureState {
    pub fn new(features: impl Into<Box<[i64]>>) -> Self {
        FeatureState(features.into())
    }

    pub fn features(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<i64>> for FeatureState {
    fn from(v: Vec<i64>) -> Self {
        FeatureState(v.into_boxed_slice())
    }
}

impl fmt::Display for FeatureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// Index into [`Mdp::actions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("commands {first} and {second} for action `{action}` are both enabled in {state}")]
    OverlappingCommands {
        action: String,
        state: FeatureState,
        first: usize,
        second: usize,
    },
    #[error("update sets `{variable}` to {value} outside [{lower}..{upper}] from state {state}")]
    BoundsViolation {
        variable: String,
        value: i64,
        lower: i64,
        upper: i64,
        state: FeatureState,
    },
    #[error("action `{action}` is not enabled in {state}")]
    DisabledAction { action: String, state: FeatureState },
    #[error("state {state} has {found} features, model declares {expected}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        state: FeatureState,
    },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Probability distribution over successor states; duplicates are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    support: Vec<(FeatureState, Prob)>,
}

impl Distribution {
    /// Merge duplicate successors, keeping first-appearance order and dropping
    /// zero-mass entries.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (FeatureState, Prob)>) -> Self {
        let mut support: Vec<(FeatureState, Prob)> = Vec::new();
        for (s, p) in pairs {
            if p.is_zero() {
                continue;
            }
            match support.iter_mut().find(|(t, _)| *t == s) {
                Some((_, acc)) => *acc = acc.plus(p),
                None => support.push((s, p)),
            }
        }
        Distribution { support }
    }

    pub fn dirac(s: FeatureState) -> Self {
        Distribution {
            support: vec![(s, Prob::one())],
        }
    }

    pub fn support(&self) -> &[(FeatureState, Prob)] {
        &self.support
    }

    pub fn into_support(self) -> Vec<(FeatureState, Prob)> {
        self.support
    }

    pub fn total_mass(&self) -> Prob {
        self.support.iter().fold(Prob::zero(), |acc, (_, p)| acc.plus(*p))
    }

    pub fn prob_of(&self, s: &FeatureState) -> Prob {
        self.support
            .iter()
            .find(|(t, _)| t == s)
            .map(|(_, p)| *p)
            .unwrap_or_else(Prob::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
    pub init: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constant {
    pub name: String,
    pub value: i64,
}

/// One probabilistic branch: `p : (x'=e1) & (y'=e2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub prob: Prob,
    /// `(variable index, right-hand side)`; empty means `true` (no change).
    pub assignments: Vec<(usize, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: ActionId,
    pub guard: Expr,
    pub updates: Vec<Update>,
}

/// A `rewards ... endrewards` block, kept verbatim (trimmed, non-empty lines).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewardBlock {
    pub name: Option<String>,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub module_name: String,
    pub constants: Vec<Constant>,
    pub variables: Vec<Variable>,
    pub actions: Vec<String>,
    pub commands: Vec<Command>,
    pub labels: BTreeMap<String, Expr>,
    pub rewards: Vec<RewardBlock>,
}

impl Mdp {
    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn initial_state(&self) -> FeatureState {
        self.variables.iter().map(|v| v.init).collect::<Vec<_>>().into()
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(ActionId)
    }

    pub fn action_name(&self, id: ActionId) -> &str {
        &self.actions[id.0]
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    /// `[x=0, y=1]` with variables in declaration order.
    pub fn render_state(&self, s: &FeatureState) -> String {
        let parts: Vec<String> = self
            .variables
            .iter()
            .zip(s.features())
            .map(|(v, x)| format!("{}={}", v.name, x))
            .collect();
        format!("[{}]", parts.join(", "))
    }

    pub fn check_state(&self, s: &FeatureState) -> Result<(), ModelError> {
        if s.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
                state: s.clone(),
            });
        }
        for (v, &x) in self.variables.iter().zip(s.features()) {
            if x < v.lower || x > v.upper {
                return Err(ModelError::BoundsViolation {
                    variable: v.name.clone(),
                    value: x,
                    lower: v.lower,
                    upper: v.upper,
                    state: s.clone(),
                });
            }
        }
        Ok(())
    }

    /// A(s): actions with at least one satisfied guard, in global action order.
    pub fn enabled_actions(&self, s: &FeatureState) -> Result<Vec<ActionId>, ModelError> {
        self.check_state(s)?;
        let mut enabled = vec![false; self.actions.len()];
        for cmd in &self.commands {
            if !enabled[cmd.action.0] && cmd.guard.holds(s.features())? {
                enabled[cmd.action.0] = true;
            }
        }
        Ok(enabled
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| ActionId(i))
            .collect())
    }

    pub fn is_enabled(&self, s: &FeatureState, action: ActionId) -> Result<bool, ModelError> {
        for cmd in self.commands.iter().filter(|c| c.action == action) {
            if cmd.guard.holds(s.features())? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Tr(s, a). Exactly one command for `action` may be enabled in `s`.
    pub fn successor_distribution(
        &self,
        s: &FeatureState,
        action: ActionId,
    ) -> Result<Distribution, ModelError> {
        self.check_state(s)?;
        let mut selected: Option<(usize, &Command)> = None;
        for (i, cmd) in self.commands.iter().enumerate() {
            if cmd.action != action || !cmd.guard.holds(s.features())? {
                continue;
            }
            if let Some((first, _)) = selected {
                return Err(ModelError::OverlappingCommands {
                    action: self.action_name(action).to_string(),
                    state: s.clone(),
                    first,
                    second: i,
                });
            }
            selected = Some((i, cmd));
        }
        let Some((_, cmd)) = selected else {
            return Err(ModelError::DisabledAction {
                action: self
                    .actions
                    .get(action.0)
                    .cloned()
                    .unwrap_or_else(|| format!("#{}", action.0)),
                state: s.clone(),
            });
        };

        let mut pairs = Vec::with_capacity(cmd.updates.len());
        for upd in &cmd.updates {
            let mut next = s.features().to_vec();
            // parallel assignment: every right-hand side sees the old state
            for (var, rhs) in &upd.assignments {
                next[*var] = rhs.eval(s.features())?;
            }
            for &(var, _) in &upd.assignments {
                let v = &self.variables[var];
                if next[var] < v.lower || next[var] > v.upper {
                    return Err(ModelError::BoundsViolation {
                        variable: v.name.clone(),
                        value: next[var],
                        lower: v.lower,
                        upper: v.upper,
                        state: s.clone(),
                    });
                }
            }
            pairs.push((FeatureState::from(next), upd.prob));
        }
        Ok(Distribution::from_pairs(pairs))
    }
}
