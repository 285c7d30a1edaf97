//! Unbounded reachability `P=? [ F "label" ]` on induced chains, and
//! extraction of the states whose chosen action steps directly into the
//! target set.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::dtmc::InducedDtmc;
use crate::model::FeatureState;
use crate::prob::Prob;
use crate::property::SafetyProperty;
use crate::solver::{eliminate, gauss_seidel, SparseRow};

#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error("label \"{0}\" is not defined by the model")]
    UnknownLabel(String),
    #[error("value iteration did not converge after {sweeps} sweeps (last change {residual:e})")]
    NoConvergence { sweeps: u64, residual: f64 },
    #[error("solver produced {value}, outside [0, 1]")]
    OutOfRange { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumericMode {
    /// Exact when every probability is rational and the system is small
    /// enough (see [`CheckOptions::exact_state_limit`]).
    #[default]
    Auto,
    /// Exact whenever every probability is rational.
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Elimination,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub tol: f64,
    pub max_sweeps: u64,
    pub mode: NumericMode,
    pub solver: SolverChoice,
    /// Working-memory budget for elimination fill-in before falling back to
    /// Gauss–Seidel.
    pub memory_budget_bytes: usize,
    pub exact_state_limit: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol: 1e-12,
            max_sweeps: 1_000_000,
            mode: NumericMode::Auto,
            solver: SolverChoice::Elimination,
            memory_budget_bytes: 2 << 30,
            exact_state_limit: 1_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueMode {
    ExactRational,
    Float,
}

impl ValueMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueMode::ExactRational => "exact-rational",
            ValueMode::Float => "float",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverUsed {
    Elimination,
    ValueIteration,
}

impl SolverUsed {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverUsed::Elimination => "elimination",
            SolverUsed::ValueIteration => "value-iteration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMeasurement {
    pub property: SafetyProperty,
    pub value: f64,
    /// Present in exact-rational mode.
    pub exact: Option<BigRational>,
    pub mode: ValueMode,
    pub solver: SolverUsed,
    pub iterations: Option<u64>,
    pub residual: Option<f64>,
    pub states: usize,
}

/// Reachability probabilities for every state of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityValues {
    pub values: Vec<f64>,
    pub exact: Option<Vec<BigRational>>,
    pub mode: ValueMode,
    pub solver: SolverUsed,
    pub iterations: Option<u64>,
    pub residual: Option<f64>,
}

fn target_mask(dtmc: &InducedDtmc, prop: &SafetyProperty) -> Result<Vec<bool>, CheckError> {
    dtmc.label_mask(&prop.target_label)
        .ok_or_else(|| CheckError::UnknownLabel(prop.target_label.clone()))
}

/// States with a path into `target`, by backward search.
fn can_reach(dtmc: &InducedDtmc, target: &[bool]) -> Vec<bool> {
    let n = dtmc.reachable_count();
    let mut pred_start = vec![0usize; n + 1];
    for i in 0..n {
        for (j, _) in dtmc.successors(i) {
            pred_start[j + 1] += 1;
        }
    }
    for i in 0..n {
        pred_start[i + 1] += pred_start[i];
    }
    let mut fill = pred_start.clone();
    let mut preds = vec![0usize; pred_start[n]];
    for i in 0..n {
        for (j, _) in dtmc.successors(i) {
            preds[fill[j]] = i;
            fill[j] += 1;
        }
    }
    let mut seen = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| target[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &preds[pred_start[j]..pred_start[j + 1]] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen
}

struct System<S> {
    rows: Vec<SparseRow<S>>,
    rhs: Vec<S>,
}

fn assemble<S: Clone + Zero>(
    dtmc: &InducedDtmc,
    target: &[bool],
    maybe: &[usize],
    local: &[Option<usize>],
    conv: impl Fn(&Prob) -> S,
) -> System<S> {
    let mut rows = Vec::with_capacity(maybe.len());
    let mut rhs = Vec::with_capacity(maybe.len());
    for &i in maybe {
        let mut row: SparseRow<S> = Vec::new();
        let mut b = S::zero();
        for (j, p) in dtmc.successors(i) {
            if target[j] {
                b = b + conv(&p);
            } else if let Some(lj) = local[j] {
                row.push((lj, conv(&p)));
            }
        }
        row.sort_by_key(|e| e.0);
        rows.push(row);
        rhs.push(b);
    }
    System { rows, rhs }
}

pub fn reachability_values(
    dtmc: &InducedDtmc,
    prop: &SafetyProperty,
    options: &CheckOptions,
) -> Result<ReachabilityValues, CheckError> {
    let n = dtmc.reachable_count();
    let target = target_mask(dtmc, prop)?;
    let reach = can_reach(dtmc, &target);
    let maybe: Vec<usize> = (0..n).filter(|&i| reach[i] && !target[i]).collect();
    let mut local = vec![None; n];
    for (li, &i) in maybe.iter().enumerate() {
        local[i] = Some(li);
    }

    let exact_wanted = options.solver == SolverChoice::Elimination
        && dtmc.is_rational()
        && match options.mode {
            NumericMode::Auto => maybe.len() <= options.exact_state_limit,
            NumericMode::Exact => true,
            NumericMode::Float => false,
        };

    let expand = |solved: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| match local[i] {
                Some(li) => solved[li],
                None if target[i] => 1.0,
                None => 0.0,
            })
            .collect()
    };

    if exact_wanted {
        let sys = assemble(dtmc, &target, &maybe, &local, |p| {
            p.to_big().expect("chain is rational")
        });
        if let Some(x) = eliminate(sys.rows, sys.rhs, options.memory_budget_bytes) {
            let exact: Vec<BigRational> = (0..n)
                .map(|i| match local[i] {
                    Some(li) => x[li].clone(),
                    None if target[i] => BigRational::one(),
                    None => BigRational::zero(),
                })
                .collect();
            let values = exact.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
            return finish(ReachabilityValues {
                values,
                exact: Some(exact),
                mode: ValueMode::ExactRational,
                solver: SolverUsed::Elimination,
                iterations: None,
                residual: None,
            });
        }
    }

    let sys = assemble(dtmc, &target, &maybe, &local, Prob::to_f64);
    if options.solver == SolverChoice::Elimination && !exact_wanted {
        if let Some(x) = eliminate(sys.rows.clone(), sys.rhs.clone(), options.memory_budget_bytes) {
            return finish(ReachabilityValues {
                values: expand(&x),
                exact: None,
                mode: ValueMode::Float,
                solver: SolverUsed::Elimination,
                iterations: None,
                residual: None,
            });
        }
    }
    let (x, outcome) = gauss_seidel(&sys.rows, &sys.rhs, options.tol, options.max_sweeps);
    if !outcome.converged {
        return Err(CheckError::NoConvergence {
            sweeps: outcome.sweeps,
            residual: outcome.residual,
        });
    }
    finish(ReachabilityValues {
        values: expand(&x),
        exact: None,
        mode: ValueMode::Float,
        solver: SolverUsed::ValueIteration,
        iterations: Some(outcome.sweeps),
        residual: Some(outcome.residual),
    })
}

const RANGE_SLACK: f64 = 1e-9;

fn finish(r: ReachabilityValues) -> Result<ReachabilityValues, CheckError> {
    if let Some(&bad) = r
        .values
        .iter()
        .find(|v| !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(*v))
    {
        return Err(CheckError::OutOfRange { value: bad });
    }
    Ok(r)
}

/// P(◇ target) from the initial state.
pub fn check(
    dtmc: &InducedDtmc,
    prop: &SafetyProperty,
    options: &CheckOptions,
) -> Result<SafetyMeasurement, CheckError> {
    let r = reachability_values(dtmc, prop, options)?;
    let init = dtmc.initial();
    Ok(SafetyMeasurement {
        property: prop.clone(),
        value: r.values[init],
        exact: r.exact.map(|mut v| v.swap_remove(init)),
        mode: r.mode,
        solver: r.solver,
        iterations: r.iterations,
        residual: r.residual,
        states: dtmc.reachable_count(),
    })
}

/// A reachable non-target state whose chosen action moves into the target
/// set with positive probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRecord {
    pub state_index: usize,
    pub state: FeatureState,
    pub action: String,
    /// Total mass the chosen action puts on target states.
    pub one_step_prob: Prob,
    /// Most likely target successor (lowest index on ties).
    pub successor: FeatureState,
}

pub fn extract_frontier(
    dtmc: &InducedDtmc,
    prop: &SafetyProperty,
) -> Result<Vec<ViolationRecord>, CheckError> {
    let target = target_mask(dtmc, prop)?;
    let mut out = Vec::new();
    for i in 0..dtmc.reachable_count() {
        if target[i] {
            continue;
        }
        let mut mass = Prob::zero();
        let mut best: Option<(usize, Prob)> = None;
        for (j, p) in dtmc.successors(i) {
            if !target[j] {
                continue;
            }
            mass = mass.plus(p);
            let better = match best {
                None => true,
                Some((bj, bp)) => match p.cmp_value(&bp) {
                    Ordering::Greater => true,
                    Ordering::Equal => j < bj,
                    Ordering::Less => false,
                },
            };
            if better {
                best = Some((j, p));
            }
        }
        if let Some((j, _)) = best {
            out.push(ViolationRecord {
                state_index: i,
                state: dtmc.state(i).clone(),
                action: dtmc.action_label(i).to_string(),
                one_step_prob: mass,
                successor: dtmc.state(j).clone(),
            });
        }
    }
    Ok(out)
}
