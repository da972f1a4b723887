//! Edge-oriented reinforced random walks and random walks in random
//! environment: admissibility of reinforcement laws, moment-sequence
//! certification, simulation, and exact comparison of the reinforced law
//! with the annealed law of the matching environment.

// Validation uses `!(x > 0.0)` style tests so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissibility;
pub mod catalog;
pub mod cli;
pub mod environment;
pub mod equivalence;
pub mod error;
pub mod lattice;
pub mod laws;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
