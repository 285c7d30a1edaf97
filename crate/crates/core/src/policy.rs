//! Memoryless deterministic policies: tabular Q-tables or feedforward
//! networks scored on raw integer features, masked to enabled actions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionId, FeatureState, Mdp, ModelError};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("cannot read policy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("policy schema violation: {0}")]
    Schema(String),
    #[error("dimension mismatch at layer {layer}: {detail}")]
    DimensionMismatch { layer: usize, detail: String },
    #[error("unknown activation `{name}` at layer {layer}")]
    UnknownActivation { layer: usize, name: String },
    #[error("policy action `{0}` is not in the model")]
    UnknownAction(String),
    #[error("model action `{0}` is not scored by the policy")]
    MissingAction(String),
    #[error("policy input dimension {found} does not match the model's {expected} variables")]
    InputDimension { expected: usize, found: usize },
    #[error("policy has no entry for state {0}")]
    UnknownState(FeatureState),
    #[error("no action is enabled in state {0}")]
    NoEnabledAction(FeatureState),
    #[error("override `{action}` is not enabled in state {state}")]
    OverrideDisabled { state: FeatureState, action: String },
    #[error("strict mode: top-scored action `{action}` is not enabled in state {state}")]
    StrictArgmaxDisabled { state: FeatureState, action: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "id",
        }
    }
}

/// Dense layer; `weights[j]` holds the input weights of output unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut acc = *b;
                for (w, x) in row.iter().zip(input) {
                    acc += w * x;
                }
                self.activation.apply(acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Tabular(HashMap<FeatureState, Vec<f64>>),
    Mlp(Vec<Layer>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub actions: Vec<String>,
    pub scorer: Scorer,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum PolicyFile {
    Tabular {
        actions: Vec<String>,
        entries: Vec<TabularEntry>,
    },
    Mlp {
        actions: Vec<String>,
        layers: Vec<LayerFile>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularEntry {
    state: Vec<i64>,
    q: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: String,
}

impl PolicyModel {
    pub fn kind(&self) -> &'static str {
        match self.scorer {
            Scorer::Tabular(_) => "tabular",
            Scorer::Mlp(_) => "mlp",
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| PolicyError::Schema(e.to_string()))?;
        let model = match file {
            PolicyFile::Tabular { actions, entries } => {
                let mut table = HashMap::with_capacity(entries.len());
                for e in entries {
                    if e.q.len() != actions.len() {
                        return Err(PolicyError::Schema(format!(
                            "entry for state {:?} has {} scores for {} actions",
                            e.state,
                            e.q.len(),
                            actions.len()
                        )));
                    }
                    let state = FeatureState::from(e.state);
                    if table.insert(state.clone(), e.q).is_some() {
                        return Err(PolicyError::Schema(format!("duplicate entry for state {state}")));
                    }
                }
                PolicyModel {
                    actions,
                    scorer: Scorer::Tabular(table),
                }
            }
            PolicyFile::Mlp { actions, layers } => {
                let mut out = Vec::with_capacity(layers.len());
                for (i, l) in layers.into_iter().enumerate() {
                    let activation = match l.act.as_str() {
                        "relu" => Activation::Relu,
                        "id" => Activation::Identity,
                        _ => {
                            return Err(PolicyError::UnknownActivation {
                                layer: i + 1,
                                name: l.act,
                            })
                        }
                    };
                    out.push(Layer {
                        weights: l.w,
                        bias: l.b,
                        activation,
                    });
                }
                PolicyModel {
                    actions,
                    scorer: Scorer::Mlp(out),
                }
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Stable JSON in the policy file schema (tabular entries sorted by state).
    pub fn to_json(&self) -> String {
        let file = match &self.scorer {
            Scorer::Tabular(table) => {
                let mut entries: Vec<_> = table.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                PolicyFile::Tabular {
                    actions: self.actions.clone(),
                    entries: entries
                        .into_iter()
                        .map(|(s, q)| TabularEntry {
                            state: s.features().to_vec(),
                            q: q.clone(),
                        })
                        .collect(),
                }
            }
            Scorer::Mlp(layers) => PolicyFile::Mlp {
                actions: self.actions.clone(),
                layers: layers
                    .iter()
                    .map(|l| LayerFile {
                        w: l.weights.clone(),
                        b: l.bias.clone(),
                        act: l.activation.tag().to_string(),
                    })
                    .collect(),
            },
        };
        serde_json::to_string(&file).expect("policy serialization cannot fail")
    }

    fn validate(&self) -> Result<(), PolicyError> {
        if self.actions.is_empty() {
            return Err(PolicyError::Schema("policy declares no actions".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.actions {
            if !seen.insert(a) {
                return Err(PolicyError::Schema(format!("duplicate action `{a}`")));
            }
        }
        match &self.scorer {
            Scorer::Tabular(table) => {
                let mut dims = table.keys().map(FeatureState::dim);
                if let Some(d) = dims.next() {
                    if dims.any(|x| x != d) {
                        return Err(PolicyError::Schema("tabular states differ in length".into()));
                    }
                }
            }
            Scorer::Mlp(layers) => {
                if layers.is_empty() {
                    return Err(PolicyError::Schema("mlp has no layers".into()));
                }
                for (i, l) in layers.iter().enumerate() {
                    let layer = i + 1;
                    if l.weights.len() != l.bias.len() {
                        return Err(PolicyError::DimensionMismatch {
                            layer,
                            detail: format!("{} weight rows but {} biases", l.weights.len(), l.bias.len()),
                        });
                    }
                    if l.weights.is_empty() || l.input_dim() == 0 {
                        return Err(PolicyError::DimensionMismatch {
                            layer,
                            detail: "empty weight matrix".into(),
                        });
                    }
                    if l.weights.iter().any(|r| r.len() != l.input_dim()) {
                        return Err(PolicyError::DimensionMismatch {
                            layer,
                            detail: "ragged weight matrix".into(),
                        });
                    }
                    if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                        return Err(PolicyError::DimensionMismatch {
                            layer,
                            detail: format!(
                                "expects {} inputs, previous layer produces {}",
                                l.input_dim(),
                                layers[i - 1].output_dim()
                            ),
                        });
                    }
                }
                let out = layers.last().map_or(0, Layer::output_dim);
                if out != self.actions.len() {
                    return Err(PolicyError::DimensionMismatch {
                        layer: layers.len(),
                        detail: format!("{out} outputs for {} actions", self.actions.len()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Raw scores in the policy's own action order.
    pub fn raw_scores(&self, s: &FeatureState) -> Result<Vec<f64>, PolicyError> {
        match &self.scorer {
            Scorer::Tabular(table) => table
                .get(s)
                .cloned()
                .ok_or_else(|| PolicyError::UnknownState(s.clone())),
            Scorer::Mlp(layers) => {
                let mut v: Vec<f64> = s.features().iter().map(|&x| x as f64).collect();
                for l in layers {
                    v = l.forward(&v);
                }
                Ok(v)
            }
        }
    }
}

/// Enabled actions at a state, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRanking {
    pub state: FeatureState,
    pub scored: Vec<(ActionId, f64)>,
}

impl PolicyRanking {
    pub fn best(&self) -> Option<ActionId> {
        self.scored.first().map(|(a, _)| *a)
    }

    pub fn actions(&self) -> Vec<ActionId> {
        self.scored.iter().map(|(a, _)| *a).collect()
    }
}

/// State → action patches applied on top of the policy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverrideMap(BTreeMap<FeatureState, ActionId>);

impl OverrideMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps an existing override for the same state; returns whether the
    /// new one was inserted.
    pub fn insert_if_absent(&mut self, state: FeatureState, action: ActionId) -> bool {
        if self.0.contains_key(&state) {
            return false;
        }
        self.0.insert(state, action);
        true
    }

    pub fn insert_named(
        &mut self,
        mdp: &Mdp,
        state: FeatureState,
        action: &str,
    ) -> Result<(), PolicyError> {
        let id = mdp
            .action_id(action)
            .ok_or_else(|| PolicyError::UnknownAction(action.to_string()))?;
        self.0.insert(state, id);
        Ok(())
    }

    pub fn get(&self, s: &FeatureState) -> Option<ActionId> {
        self.0.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureState, &ActionId)> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyOptions {
    /// Fail instead of masking when the unmasked argmax is disabled.
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondBest {
    pub action: ActionId,
    pub no_alternative: bool,
}

/// A policy bound to a model: action names resolved and dimensions checked.
#[derive(Debug, Clone)]
pub struct PolicyEngine<'a> {
    mdp: &'a Mdp,
    model: &'a PolicyModel,
    /// model action index → policy output index
    from_model: Vec<usize>,
    options: PolicyOptions,
}

impl<'a> PolicyEngine<'a> {
    pub fn new(
        model: &'a PolicyModel,
        mdp: &'a Mdp,
        options: PolicyOptions,
    ) -> Result<Self, PolicyError> {
        for a in &model.actions {
            if mdp.action_id(a).is_none() {
                return Err(PolicyError::UnknownAction(a.clone()));
            }
        }
        let mut from_model = Vec::with_capacity(mdp.actions.len());
        for a in &mdp.actions {
            match model.actions.iter().position(|p| p == a) {
                Some(i) => from_model.push(i),
                None => return Err(PolicyError::MissingAction(a.clone())),
            }
        }
        let input = match &model.scorer {
            Scorer::Tabular(table) => table.keys().next().map(FeatureState::dim),
            Scorer::Mlp(layers) => Some(layers[0].input_dim()),
        };
        if let Some(found) = input.filter(|&d| d != mdp.dim()) {
            return Err(PolicyError::InputDimension {
                expected: mdp.dim(),
                found,
            });
        }
        Ok(PolicyEngine {
            mdp,
            model,
            from_model,
            options,
        })
    }

    pub fn mdp(&self) -> &'a Mdp {
        self.mdp
    }

    pub fn model(&self) -> &'a PolicyModel {
        self.model
    }

    /// Scores indexed by model action id.
    pub fn scores(&self, s: &FeatureState) -> Result<Vec<f64>, PolicyError> {
        let raw = self.model.raw_scores(s)?;
        Ok(self.from_model.iter().map(|&i| raw[i]).collect())
    }

    pub fn rank_actions(&self, s: &FeatureState) -> Result<PolicyRanking, PolicyError> {
        let enabled = self.mdp.enabled_actions(s)?;
        let scores = self.scores(s)?;
        let mut scored: Vec<(ActionId, f64)> =
            enabled.into_iter().map(|a| (a, scores[a.0])).collect();
        // stable sort: equal scores keep declaration order
        scored.sort_by(|x, y| y.1.total_cmp(&x.1));
        if scored.is_empty() {
            return Err(PolicyError::NoEnabledAction(s.clone()));
        }
        Ok(PolicyRanking {
            state: s.clone(),
            scored,
        })
    }

    pub fn choose(&self, overrides: &OverrideMap, s: &FeatureState) -> Result<ActionId, PolicyError> {
        if let Some(a) = overrides.get(s) {
            if !self.mdp.is_enabled(s, a)? {
                return Err(PolicyError::OverrideDisabled {
                    state: s.clone(),
                    action: self.mdp.action_name(a).to_string(),
                });
            }
            return Ok(a);
        }
        let ranking = self.rank_actions(s)?;
        let best = ranking.scored[0].0;
        if self.options.strict {
            let scores = self.scores(s)?;
            let mut raw_best = 0;
            for (i, v) in scores.iter().enumerate() {
                if *v > scores[raw_best] {
                    raw_best = i;
                }
            }
            if raw_best != best.0 {
                return Err(PolicyError::StrictArgmaxDisabled {
                    state: s.clone(),
                    action: self.mdp.actions[raw_best].clone(),
                });
            }
        }
        Ok(best)
    }

    pub fn second_best(&self, s: &FeatureState) -> Result<SecondBest, PolicyError> {
        let ranking = self.rank_actions(s)?;
        Ok(match ranking.scored.get(1) {
            Some((a, _)) => SecondBest {
                action: *a,
                no_alternative: false,
            },
            None => SecondBest {
                action: ranking.scored[0].0,
                no_alternative: true,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::{parse_model, ModelSource};

    const CHAIN: &str = "mdp module chain x : [0..2] init 0;
  [a] x=0 -> 0.5:(x'=1) + 0.5:(x'=2);
  [b] x=0 -> 1:(x'=2);
  [a] x=1 -> 1:(x'=1);
  [a] x=2 -> 1:(x'=2);
endmodule
label \"bad\" = x=1;";

    const CONSTANT_MLP: &str =
        r#"{"type":"mlp","actions":["a","b"],"layers":[{"w":[[0.0],[0.0]],"b":[0.1,0.9],"act":"id"}]}"#;

    fn chain() -> Mdp {
        parse_model(&ModelSource::inline(CHAIN)).unwrap()
    }

    fn st(v: i64) -> FeatureState {
        FeatureState::from(vec![v])
    }

    fn tabular(actions: &[&str], entries: &[(Vec<i64>, Vec<f64>)]) -> PolicyModel {
        let entries: Vec<String> = entries
            .iter()
            .map(|(s, q)| format!(r#"{{"state":{s:?},"q":{q:?}}}"#))
            .collect();
        PolicyModel::from_json(&format!(
            r#"{{"type":"tabular","actions":{actions:?},"entries":[{}]}}"#,
            entries.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn loads_tabular_and_mlp() {
        let t = tabular(&["a", "b"], &[(vec![0], vec![1.0, 0.0]), (vec![1], vec![1.0, 0.0]), (vec![2], vec![1.0, 0.0])]);
        assert_eq!(t.kind(), "tabular");
        let m = PolicyModel::from_json(CONSTANT_MLP).unwrap();
        assert_eq!(m.kind(), "mlp");
    }

    #[test]
    fn layer_chain_mismatch() {
        let text = r#"{"type":"mlp","actions":["a","b"],"layers":[
            {"w":[[1.0],[1.0],[1.0]],"b":[0,0,0],"act":"relu"},
            {"w":[[1.0,1.0],[1.0,1.0]],"b":[0,0],"act":"id"}]}"#;
        let err = PolicyModel::from_json(text).unwrap_err();
        assert!(err.to_string().starts_with("dimension mismatch at layer 2"), "{err}");
    }

    #[test]
    fn unknown_fields_and_activations_are_rejected() {
        let extra = r#"{"type":"mlp","actions":["a"],"layers":[],"bias":1}"#;
        assert!(matches!(PolicyModel::from_json(extra), Err(PolicyError::Schema(_))));
        let tanh = r#"{"type":"mlp","actions":["a"],"layers":[{"w":[[1.0]],"b":[0],"act":"tanh"}]}"#;
        assert!(matches!(
            PolicyModel::from_json(tanh),
            Err(PolicyError::UnknownActivation { layer: 1, .. })
        ));
    }

    #[test]
    fn action_names_are_checked_against_model() {
        let mdp = chain();
        let p = PolicyModel::from_json(
            r#"{"type":"mlp","actions":["a","c"],"layers":[{"w":[[0.0],[0.0]],"b":[0,0],"act":"id"}]}"#,
        )
        .unwrap();
        assert!(matches!(
            PolicyEngine::new(&p, &mdp, PolicyOptions::default()),
            Err(PolicyError::UnknownAction(a)) if a == "c"
        ));
    }

    #[test]
    fn constant_network_ranks_by_bias() {
        let mdp = chain();
        let p = PolicyModel::from_json(CONSTANT_MLP).unwrap();
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        let r = eng.rank_actions(&st(0)).unwrap();
        assert_eq!(r.scored, vec![(ActionId(1), 0.9), (ActionId(0), 0.1)]);
        let r = eng.rank_actions(&st(1)).unwrap();
        assert_eq!(r.scored, vec![(ActionId(0), 0.1)]);
    }

    #[test]
    fn ties_follow_declaration_order() {
        let mdp = chain();
        let p = tabular(&["b", "a"], &[(vec![0], vec![1.0, 1.0])]);
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        assert_eq!(eng.rank_actions(&st(0)).unwrap().actions(), vec![ActionId(0), ActionId(1)]);
    }

    #[test]
    fn unknown_state_in_table() {
        let mdp = chain();
        let p = tabular(&["a", "b"], &[(vec![0], vec![1.0, 0.0])]);
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        assert!(matches!(eng.rank_actions(&st(2)), Err(PolicyError::UnknownState(_))));
    }

    #[test]
    fn choose_respects_overrides() {
        let mdp = chain();
        let p = PolicyModel::from_json(CONSTANT_MLP).unwrap();
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        let none = OverrideMap::new();
        assert_eq!(eng.choose(&none, &st(0)).unwrap(), ActionId(1));
        let mut ov = OverrideMap::new();
        ov.insert_named(&mdp, st(0), "a").unwrap();
        assert_eq!(eng.choose(&ov, &st(0)).unwrap(), ActionId(0));
        let mut bad = OverrideMap::new();
        bad.insert_named(&mdp, st(1), "b").unwrap();
        assert!(matches!(eng.choose(&bad, &st(1)), Err(PolicyError::OverrideDisabled { .. })));
    }

    #[test]
    fn strict_mode_refuses_disabled_argmax() {
        let mdp = chain();
        let p = PolicyModel::from_json(CONSTANT_MLP).unwrap();
        let lax = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        assert_eq!(lax.choose(&OverrideMap::new(), &st(1)).unwrap(), ActionId(0));
        let strict = PolicyEngine::new(&p, &mdp, PolicyOptions { strict: true }).unwrap();
        assert!(matches!(
            strict.choose(&OverrideMap::new(), &st(1)),
            Err(PolicyError::StrictArgmaxDisabled { .. })
        ));
    }

    #[test]
    fn second_best_variants() {
        let mdp = chain();
        let p = PolicyModel::from_json(CONSTANT_MLP).unwrap();
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        assert_eq!(
            eng.second_best(&st(0)).unwrap(),
            SecondBest { action: ActionId(0), no_alternative: false }
        );
        assert_eq!(
            eng.second_best(&st(1)).unwrap(),
            SecondBest { action: ActionId(0), no_alternative: true }
        );
    }

    #[test]
    fn second_best_three_actions() {
        let mdp = parse_model(&ModelSource::inline(
            "mdp module m x:[0..0] init 0; [a] true -> true; [b] true -> true; [c] true -> true; endmodule",
        ))
        .unwrap();
        let p = tabular(&["a", "b", "c"], &[(vec![0], vec![3.0, 2.0, 1.0])]);
        let eng = PolicyEngine::new(&p, &mdp, PolicyOptions::default()).unwrap();
        assert_eq!(eng.second_best(&st(0)).unwrap().action, ActionId(1));
    }

    #[test]
    fn json_round_trip() {
        let p = tabular(&["a", "b"], &[(vec![2], vec![0.5, 1.0]), (vec![0], vec![1.0, 0.0])]);
        assert_eq!(PolicyModel::from_json(&p.to_json()).unwrap(), p);
    }
}
