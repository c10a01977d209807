//! Adversarial online multi-task episodic RL under l1 model separation.
//!
//! A learner faces a stream of episodes, each drawn from one of `M`
//! tabular MDPs that share states, actions and reward but differ in
//! their transitions. The models are pairwise separated in l1 at some
//! state-action pair, which lets a learner tell them apart by sampling.

pub mod adversary;
pub mod agents;
pub mod coin_lab;
pub mod environments;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod separability;

pub use error::{Error, Result};
