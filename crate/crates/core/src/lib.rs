//! Depression-domain behavioral testing for binary text classifiers.
//!
//! This crate holds everything that does not touch the outside world: the
//! 23-test DECK suite and its perturbation primitives, the case runner and
//! aggregation, the classification metrics and hypothesis tests, the
//! Wasserstein shift estimators, the hashed bag-of-words reference model, and
//! the training-data augmentation procedure. It is `no_std` and only needs an
//! allocator; file formats, model transports and the command line live in the
//! `deck` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod baseline;
pub mod corpus;
mod error;
pub mod model;
pub mod runner;
pub mod shift;
pub mod stats;
pub mod suite;
pub mod synth;
pub mod textops;

pub use error::{Error, Result};
