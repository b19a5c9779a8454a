//! Seed-reproducible simulation of gossiping agents that share a linear
//! bandit whose parameter lies in one of `K` known subspaces.

pub mod bounds;
pub mod cli;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod par;
pub mod policies;
pub mod rng;

pub use error::{Error, Result};
