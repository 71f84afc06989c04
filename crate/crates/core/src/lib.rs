//! Randomized team formation over an asynchronous network: a deterministic
//! event simulator, the protocol itself, applications, adversaries and
//! checkers. `no_std` with `alloc`.
#![no_std]
extern crate alloc;

pub mod adversary;
pub mod app;
pub mod apps;
pub mod bag;
pub mod kernel;
pub mod log;
pub mod lowerbound;
pub mod monitor;
pub mod msg;
pub mod protocol;
pub mod pu_graph;
pub mod rng;
pub mod stats;
pub mod time;
pub mod trace;
