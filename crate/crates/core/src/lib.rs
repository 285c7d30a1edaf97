//! Verification and counterfactual repair of memoryless RL policies.
//!
//! The pipeline builds the Markov chain a policy induces on an MDP, computes
//! the probability of eventually reaching an unsafe label, extracts the
//! states whose chosen action leads straight into the unsafe set, asks an
//! advisor for an explained alternative action at each of them, patches the
//! policy and verifies again.

pub mod advisor;
pub mod builder;
pub mod checker;
pub mod dtmc;
pub mod expr;
pub mod model;
pub mod policy;
pub mod prism;
pub mod prob;
pub mod property;
pub mod repair;
pub mod report;
mod solver;

pub use model::{ActionId, Distribution, FeatureState, Mdp, ModelError};
pub use prob::Prob;
