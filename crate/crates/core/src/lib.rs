//! Deterministic simulator for a lock-based BFT consensus protocol, its
//! repeated-consensus driver, and reward-fairness mechanisms.

pub mod adversary;
pub mod block;
pub mod check;
pub mod config;
pub mod fairness;
pub mod harness;
pub mod monitor;
pub mod netsim;
pub mod oneshot;
pub mod quorum;
pub mod repeated;
pub mod scenarios;
pub mod trace;
pub mod types;
