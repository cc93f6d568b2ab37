//! Experiment harness, command-line front end and HTTP session service for
//! retroactive preference alignment.

pub mod config;
pub mod envs;
pub mod error;
pub mod harness;
pub mod service;
pub mod store;
pub mod summary;

pub use error::{Error, Result};
