//! PoolFlip: a stealthy-takeover security game with heuristic agents, a PPO
//! best-response oracle and Flip-PSRO population training.

// `!(x > y)` is used on purpose: it rejects NaN along with the ordinary failures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod exec;
pub mod harness;
pub mod heuristics;
pub mod learner;
pub mod metagame;
pub mod seed;

pub use engine::{Action, Agent, AgentView, GameConfig, Player};
pub use exec::Workers;
pub use heuristics::{make_heuristic, HeuristicAgent, HeuristicSpec};
