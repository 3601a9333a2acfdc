//! Decentralized stochastic optimization with probabilistic local updates.
//!
//! Nodes on a graph each hold a private objective `f_i`; ProxSkip lets them
//! take local gradient steps and gossip only when a shared coin comes up
//! heads, with per-node control variates cancelling the drift that plain
//! local SGD suffers under heterogeneous data.

pub mod algorithms;
pub mod cli;
pub mod error;
pub mod harness;
pub mod interrupt;
pub mod plot;
pub mod problems;
pub mod reference;
pub mod rng;
pub mod topology;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
