//! Breadth-first construction of the chain a policy induces on an MDP.
//!
//! Only states reachable under the chosen actions are ever expanded.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::dtmc::{Choice, InducedDtmc};
use crate::model::{FeatureState, ModelError};
use crate::policy::{OverrideMap, PolicyEngine, PolicyError};
use crate::prob::Prob;

pub const DEFAULT_STATE_LIMIT: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("reachable state space exceeds the limit of {limit} states")]
    StateSpaceLimit { limit: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub state_limit: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }
}

/// Deadlock warnings are listed individually up to this many states.
const DEADLOCK_WARNINGS_LISTED: usize = 10;

pub fn build_induced(
    engine: &PolicyEngine<'_>,
    overrides: &OverrideMap,
    options: &BuildOptions,
) -> Result<InducedDtmc, BuildError> {
    let mdp = engine.mdp();
    let init = mdp.initial_state();
    mdp.check_state(&init)?;

    let mut states: Vec<FeatureState> = vec![init.clone()];
    let mut index: HashMap<FeatureState, usize> = HashMap::from([(init, 0)]);
    let mut chosen = Vec::new();
    let mut row_start = vec![0];
    let mut targets = Vec::new();
    let mut probs = Vec::new();
    let mut deadlocks = Vec::new();

    // states are appended in discovery order, so BFS is a cursor over `states`
    let mut i = 0;
    while i < states.len() {
        let s = states[i].clone();
        let choice = match engine.choose(overrides, &s) {
            Ok(a) => Choice::Action(a),
            Err(PolicyError::NoEnabledAction(_)) => Choice::Deadlock,
            Err(e) => return Err(e.into()),
        };
        match choice {
            Choice::Action(a) => {
                let dist = mdp.successor_distribution(&s, a)?;
                for (succ, p) in dist.into_support() {
                    let j = match index.get(&succ) {
                        Some(&j) => j,
                        None => {
                            let j = states.len();
                            if j >= options.state_limit {
                                return Err(BuildError::StateSpaceLimit {
                                    limit: options.state_limit,
                                });
                            }
                            index.insert(succ.clone(), j);
                            states.push(succ);
                            j
                        }
                    };
                    targets.push(j);
                    probs.push(p);
                }
            }
            Choice::Deadlock => {
                deadlocks.push(i);
                targets.push(i);
                probs.push(Prob::one());
            }
        }
        chosen.push(choice);
        row_start.push(targets.len());
        i += 1;
    }

    let mut labels = BTreeMap::new();
    for (name, expr) in &mdp.labels {
        let mut set = Vec::new();
        for (i, s) in states.iter().enumerate() {
            if expr.holds(s.features()).map_err(ModelError::from)? {
                set.push(i);
            }
        }
        labels.insert(name.clone(), set);
    }

    let mut warnings = Vec::new();
    for &i in deadlocks.iter().take(DEADLOCK_WARNINGS_LISTED) {
        warnings.push(format!(
            "deadlock in state {} {}: made absorbing",
            i,
            mdp.render_state(&states[i])
        ));
    }
    if deadlocks.len() > DEADLOCK_WARNINGS_LISTED {
        warnings.push(format!(
            "{} further deadlock states made absorbing",
            deadlocks.len() - DEADLOCK_WARNINGS_LISTED
        ));
    }

    Ok(InducedDtmc {
        states,
        index,
        chosen,
        row_start,
        targets,
        probs,
        labels,
        action_names: mdp.actions.clone(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionId, Mdp};
    use crate::policy::{PolicyModel, PolicyOptions};
    use crate::prism::{parse_model, ModelSource};

    const CHAIN: &str = "mdp module chain x : [0..2] init 0;
  [a] x=0 -> 0.5:(x'=1) + 0.5:(x'=2);
  [b] x=0 -> 1:(x'=2);
  [a] x=1 -> 1:(x'=1);
  [a] x=2 -> 1:(x'=2);
endmodule
label \"bad\" = x=1;";

    fn chain() -> Mdp {
        parse_model(&ModelSource::inline(CHAIN)).unwrap()
    }

    fn prefer(first: &str) -> PolicyModel {
        let (qa, qb) = if first == "a" { (1.0, 0.0) } else { (0.0, 1.0) };
        PolicyModel::from_json(&format!(
            r#"{{"type":"tabular","actions":["a","b"],"entries":[
                {{"state":[0],"q":[{qa},{qb}]}},{{"state":[1],"q":[1,0]}},{{"state":[2],"q":[1,0]}}]}}"#
        ))
        .unwrap()
    }

    fn build(mdp: &Mdp, policy: &PolicyModel) -> InducedDtmc {
        let eng = PolicyEngine::new(policy, mdp, PolicyOptions::default()).unwrap();
        build_induced(&eng, &OverrideMap::new(), &BuildOptions::default()).unwrap()
    }

    fn st(v: i64) -> FeatureState {
        FeatureState::from(vec![v])
    }

    #[test]
    fn a_preferring_policy_reaches_three_states() {
        let mdp = chain();
        let d = build(&mdp, &prefer("a"));
        assert_eq!(d.reachable_count(), 3);
        assert_eq!(d.states(), &[st(0), st(1), st(2)]);
        assert!((0..3).all(|i| d.choice(i) == Choice::Action(ActionId(0))));
        assert_eq!(d.label_set("bad").unwrap(), &[1]);
    }

    #[test]
    fn b_preferring_policy_never_builds_bad_state() {
        let mdp = chain();
        let d = build(&mdp, &prefer("b"));
        assert_eq!(d.reachable_count(), 2);
        assert_eq!(d.states(), &[st(0), st(2)]);
        assert_eq!(d.index_of(&st(1)), None);
        assert!(d.label_set("bad").unwrap().is_empty());
    }

    #[test]
    fn absorbing_model_is_single_state() {
        let mdp = parse_model(&ModelSource::inline(
            "mdp module m x:[0..0] init 0; [a] true -> 1:(x'=x); endmodule",
        ))
        .unwrap();
        let p = PolicyModel::from_json(r#"{"type":"mlp","actions":["a"],"layers":[{"w":[[0]],"b":[0],"act":"id"}]}"#)
            .unwrap();
        let d = build(&mdp, &p);
        assert_eq!(d.reachable_count(), 1);
        assert_eq!(d.successors(0).collect::<Vec<_>>(), vec![(0, Prob::one())]);
    }

    #[test]
    fn deadlocks_become_self_loops_with_warning() {
        let mdp = parse_model(&ModelSource::inline(
            "mdp module m x:[0..1] init 0; [a] x=0 -> (x'=1); endmodule",
        ))
        .unwrap();
        let p = PolicyModel::from_json(r#"{"type":"mlp","actions":["a"],"layers":[{"w":[[0]],"b":[0],"act":"id"}]}"#)
            .unwrap();
        let d = build(&mdp, &p);
        assert_eq!(d.choice(1), Choice::Deadlock);
        assert_eq!(d.action_label(1), "<deadlock>");
        assert_eq!(d.successors(1).collect::<Vec<_>>(), vec![(1, Prob::one())]);
        assert_eq!(d.warnings().len(), 1);
    }

    #[test]
    fn state_limit_is_enforced() {
        let mdp = chain();
        let p = prefer("a");
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        let err = build_induced(&eng, &OverrideMap::new(), &BuildOptions { state_limit: 2 }).unwrap_err();
        assert!(matches!(err, BuildError::StateSpaceLimit { limit: 2 }));
    }

    #[test]
    fn overrides_redirect_exploration() {
        let mdp = chain();
        let p = prefer("a");
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        let mut ov = OverrideMap::new();
        ov.insert_named(&mdp, st(0), "b").unwrap();
        let d = build_induced(&eng, &ov, &BuildOptions::default()).unwrap();
        assert_eq!(d.reachable_count(), 2);
    }

    #[test]
    fn explicit_dump_format() {
        let mdp = chain();
        let d = build(&mdp, &prefer("a"));
        assert_eq!(
            d.to_explicit_text(),
            "STATES 3\n0: a | 1:1/2 2:1/2\n1: a | 1:1\n2: a | 2:1\nLABEL bad: 1\n"
        );
    }
}
