//! Retroactive preference alignment over a stored set of multi-objective
//! policies.
//!
//! A multi-policy learner produces a Pareto front of deterministic policies
//! offline. At run time the agent executes one of them, reads a scalar
//! reaction from the user, turns it into an update of its estimate of the
//! user's preference weights, and re-selects a policy from the fixed front.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod alignment;
pub mod env;
pub mod error;
pub mod interpreter;
pub mod learner;
pub mod preference;
pub mod rng;
pub mod selector;
pub mod user;

pub use error::{Error, Result};
