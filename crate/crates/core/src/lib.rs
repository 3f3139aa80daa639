//! Hierarchical text-environment agent: a subgoal planner, a reason-and-act
//! actor, and a belief state made of a rule-driven symbolic memory plus an
//! LLM-synthesized textual memory.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the network or the clock lives in the `wmplan-harness` crate.

#![no_std]

extern crate alloc;

pub mod actor;
pub mod belief;
pub mod domain;
pub mod env;
pub mod gateway;
pub mod orchestrator;
pub mod planner;
pub mod symbolic;

pub use domain::{
    render_belief, BeliefState, ComponentTag, Plan, Predicate, PredicateParseError, SubEpisode,
    SubEpisodeStatus, Subgoal, SymbolicMemory, TextualMemory, TokenLedger, VerificationReport,
};
pub use env::{Domain, Environment, INVALID_ACTION_MESSAGE};
pub use gateway::{ChatBackend, ChatRequest, Gateway, GatewayError};
pub use orchestrator::{run_episode, EpisodeRecord, RunConfig};
