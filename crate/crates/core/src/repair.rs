//! Verify → extract → advise → patch → re-verify.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::advisor::{baseline_advice, AdviceStatus, Advisor, AdvisorError, AdvisorKind, CounterfactualAdvice};
use crate::builder::{build_induced, BuildError, BuildOptions};
use crate::checker::{check, extract_frontier, CheckError, CheckOptions, SafetyMeasurement, ViolationRecord};
use crate::model::{FeatureState, Mdp};
use crate::policy::{OverrideMap, PolicyEngine, PolicyError, PolicyModel, PolicyOptions};
use crate::property::SafetyProperty;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("passes must be at least 1")]
    NoPasses,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
}

#[derive(Debug, Clone, Copy)]
pub struct RepairOptions {
    pub passes: usize,
    /// Use the second-best action where the advisor gave no usable answer.
    pub fallback_baseline: bool,
    pub policy: PolicyOptions,
    pub build: BuildOptions,
    pub check: CheckOptions,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            passes: 1,
            fallback_baseline: false,
            policy: PolicyOptions::default(),
            build: BuildOptions::default(),
            check: CheckOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverrideSource {
    Advisor,
    BaselineFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppliedOverride {
    pub pass: usize,
    pub state: FeatureState,
    pub rendered: String,
    pub from: String,
    pub to: String,
    pub source: OverrideSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    pub pass: usize,
    pub frontier: Vec<ViolationRecord>,
    pub advice: Vec<CounterfactualAdvice>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdviceCounts {
    pub ok: usize,
    pub format_error: usize,
    pub disabled_action: usize,
    pub no_alternative: usize,
}

impl AdviceCounts {
    fn add(&mut self, status: AdviceStatus) {
        match status {
            AdviceStatus::Ok => self.ok += 1,
            AdviceStatus::FormatError => self.format_error += 1,
            AdviceStatus::DisabledAction => self.disabled_action += 1,
            AdviceStatus::NoAlternative => self.no_alternative += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairReport {
    pub method: AdvisorKind,
    pub property: SafetyProperty,
    pub original: SafetyMeasurement,
    pub repaired: SafetyMeasurement,
    /// Frontier of the unpatched policy.
    pub frontier_size: usize,
    pub counts: AdviceCounts,
    pub states_before: usize,
    pub states_after: usize,
    pub passes: Vec<PassRecord>,
    pub overrides: Vec<AppliedOverride>,
    /// Frontier states of the final chain that no earlier pass saw.
    pub new_frontier: Vec<String>,
    pub warnings: Vec<String>,
}

impl RepairReport {
    pub fn improved(&self) -> bool {
        self.repaired.value <= self.original.value
    }

    pub fn no_repair_needed(&self) -> bool {
        self.frontier_size == 0
    }
}

pub fn run_pipeline(
    mdp: &Mdp,
    policy: &PolicyModel,
    prop: &SafetyProperty,
    advisor: &Advisor,
    options: &RepairOptions,
) -> Result<RepairReport, RepairError> {
    if options.passes == 0 {
        return Err(RepairError::NoPasses);
    }
    let engine = PolicyEngine::new(policy, mdp, options.policy)?;
    let mut overrides = OverrideMap::new();

    let original_chain = build_induced(&engine, &overrides, &options.build)?;
    let original = check(&original_chain, prop, &options.check)?;
    let mut warnings: Vec<String> = original_chain.warnings().to_vec();
    let mut frontier = extract_frontier(&original_chain, prop)?;
    let frontier_size = frontier.len();
    let states_before = original_chain.reachable_count();
    drop(original_chain);

    let mut seen: BTreeSet<FeatureState> = BTreeSet::new();
    let mut passes = Vec::new();
    let mut applied = Vec::new();
    let mut counts = AdviceCounts::default();
    let mut repaired = original.clone();
    let mut states_after = states_before;

    for pass in 1..=options.passes {
        if frontier.is_empty() {
            break;
        }
        seen.extend(frontier.iter().map(|r| r.state.clone()));
        let advice = advisor.advise(&engine, &frontier)?;
        for adv in &advice {
            counts.add(adv.status);
            let pick = match (adv.status, &adv.alternative) {
                (AdviceStatus::Ok, Some(alt)) => Some((alt.clone(), OverrideSource::Advisor)),
                _ if options.fallback_baseline => {
                    let b = baseline_advice(&engine, &adv.record)?;
                    match (b.status, b.alternative) {
                        (AdviceStatus::Ok, Some(alt)) => Some((alt, OverrideSource::BaselineFallback)),
                        _ => None,
                    }
                }
                _ => None,
            };
            let Some((alt, source)) = pick else { continue };
            let id = mdp.action_id(&alt).expect("advised actions exist in the model");
            if overrides.insert_if_absent(adv.record.state.clone(), id) {
                applied.push(AppliedOverride {
                    pass,
                    state: adv.record.state.clone(),
                    rendered: mdp.render_state(&adv.record.state),
                    from: adv.record.action.clone(),
                    to: alt,
                    source,
                });
            }
        }
        passes.push(PassRecord {
            pass,
            frontier: std::mem::take(&mut frontier),
            advice,
        });

        let chain = build_induced(&engine, &overrides, &options.build)?;
        repaired = check(&chain, prop, &options.check)?;
        states_after = chain.reachable_count();
        for w in chain.warnings() {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        frontier = extract_frontier(&chain, prop)?;
        // states already patched keep their first override
        if pass < options.passes {
            frontier.retain(|r| overrides.get(&r.state).is_none());
        }
    }

    let new_frontier: Vec<String> = frontier
        .iter()
        .filter(|r| !seen.contains(&r.state) && !passes.is_empty())
        .map(|r| mdp.render_state(&r.state))
        .collect();
    for s in &new_frontier {
        warnings.push(format!("new frontier state after patching: {s}"));
    }
    if repaired.value > original.value {
        warnings.push(format!(
            "repaired probability {} exceeds original {}",
            repaired.value, original.value
        ));
    }

    Ok(RepairReport {
        method: advisor.kind(),
        property: prop.clone(),
        original,
        repaired,
        frontier_size,
        counts,
        states_before,
        states_after,
        passes,
        overrides: applied,
        new_frontier,
        warnings,
    })
}
